#include "roughlab/errors.hpp"

#include <sstream>

namespace roughlab {

FactorizationError::FactorizationError(const std::string& what, double smallest_eigenvalue)
    : NumericalError(what), smallest_eigenvalue_(smallest_eigenvalue) {}

namespace {
std::string blow_up_message(std::size_t step, double norm, double guard) {
  std::ostringstream os;
  os << "RDE blow-up at step " << step << ": |Y| = " << norm << " exceeds guard " << guard;
  return os.str();
}
}  // namespace

BlowUpError::BlowUpError(std::size_t step, double norm, double guard)
    : NumericalError(blow_up_message(step, norm, guard)), step_(step) {}

CallbackError::CallbackError(std::size_t step, const std::string& inner)
    : NumericalError("callback failed at step " + std::to_string(step) + ": " + inner), step_(step) {}

}  // namespace roughlab

#include <ostream>

#include "CLI11.hpp"
#include "roughlab/errors.hpp"
#include "roughlab_tools/cli.hpp"

namespace roughlab::cli {

namespace {

struct SubcommandArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string seeds, outdir, label, system, input;
};

void add_common(CLI::App* sub, SubcommandArgs& a) {
  sub->add_option("-c,--config", a.config_file, "key = value configuration file");
  sub->add_option("-s,--set", a.sets, "override one key (KEY=VALUE), repeatable");
  sub->add_option("--seeds", a.seeds, "seed list, e.g. 0..63 or 1,5,9");
  sub->add_option("-o,--outdir", a.outdir, "output root (default: out)");
  sub->add_option("-l,--label", a.label, "run label (default: run)");
}

Config resolve(const SubcommandArgs& a) {
  Config c = a.config_file.empty() ? Config{} : Config::load(a.config_file);
  const std::pair<const char*, const std::string*> shortcuts[] = {
      {"seeds", &a.seeds}, {"outdir", &a.outdir}, {"label", &a.label}, {"system", &a.system}, {"input", &a.input}};
  for (const auto& [key, value] : shortcuts)
    if (!value->empty()) c.set(key, *value);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects KEY=VALUE (got '" + kv + "')");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"roughlab: rough path experiments"};
  app.require_subcommand(1);
  SubcommandArgs args;

  auto* simulate = app.add_subcommand("simulate", "sample and lift Gaussian driver paths to CSV");
  add_common(simulate, args);
  auto* roughness = app.add_subcommand("roughness", "dyadic ratio and LIL roughness reports");
  add_common(roughness, args);
  roughness->add_option("-i,--input", args.input, "path CSV to analyze instead of simulating");
  auto* doobmeyer = app.add_subcommand("doobmeyer", "integrand recovery and remainder scans");
  add_common(doobmeyer, args);
  auto* hormander = app.add_subcommand("hormander", "Gram matrices and bracket spanning checks");
  add_common(hormander, args);
  hormander->add_option("--system", args.system, "ELLIPTIC | HYPO | DEGEN");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run_subcommand(name, resolve(args), out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace roughlab::cli

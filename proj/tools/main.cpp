#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mdlae/experiment.hpp"

namespace {

mdlae::ExperimentConfig load_or_empty(const std::string& path) {
  if (path.empty()) return {};
  return mdlae::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codelength-bound auto-encoders"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  auto add_common = [&](CLI::App* sub, bool config_required, bool with_out) {
    CLI::Option* c = sub->add_option("--config", config_path, "key = value config file");
    if (config_required) c->required();
    sub->add_option("--seed", seed, "override the config's seed");
    if (with_out) sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth, true, false);
  CLI::App* train = app.add_subcommand("train", "minimize a codelength bound");
  add_common(train, true, true);
  CLI::App* compare =
      app.add_subcommand("compare-bounds", "tabulate every bound against the oracle");
  add_common(compare, true, true);
  CLI::App* gradcheck =
      app.add_subcommand("grad-check", "audit analytic gradients against differences");
  add_common(gradcheck, false, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const mdlae::ExperimentConfig cfg = load_or_empty(config_path);
    const std::uint64_t s = mdlae::resolve_seed(cfg, seed);
    const std::string out =
        !out_dir.empty() ? out_dir : cfg.get_or("out", ".");
    if (synth->parsed()) {
      std::fputs(mdlae::cmd_synth(cfg, s).c_str(), stdout);
    } else if (train->parsed()) {
      std::fputs(mdlae::cmd_train(cfg, s, out).c_str(), stdout);
    } else if (compare->parsed()) {
      std::fputs(mdlae::cmd_compare_bounds(cfg, s, out).c_str(), stdout);
    } else {
      const mdlae::GradCheckOutput res = mdlae::cmd_grad_check(cfg, s);
      std::fputs(res.text.c_str(), stdout);
      return res.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "phonosig/cli.hpp"

namespace {

using phonosig::RunConfig;

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--seed", c.seed, "Master seed for all random streams");
  sub->add_option("--workers", c.workers, "Worker threads (default: $PHONOSIG_WORKERS or all cores)");
  sub->add_flag("--json", c.json, "Also write a full-precision JSON sidecar");
}

void add_testing(CLI::App* sub, RunConfig& c) {
  sub->add_option("--n-perm", c.n_perm, "Permutations / null draws per character (default 10000)");
  sub->add_option("--alpha", c.alpha, "Significance level; D uses alpha/2 per tail")->capture_default_str();
  sub->add_option("--min-non-na", c.min_non_na, "Minimum usable values per character (default 50 for D, 20 for K)");
  sub->add_flag("--normalize", c.normalize, "Tukey-normalize frequency characters before K");
  sub->add_flag("--pseudocount", c.pseudocount, "Report (r+1)/(n+1) p-values");
  sub->add_option("--tip-map", c.tip_map, "TSV doculect<TAB>tip for renamed tips");
  const std::map<std::string, phonosig::StatisticChoice> stats{
      {"auto", phonosig::StatisticChoice::automatic},
      {"K", phonosig::StatisticChoice::k},
      {"D", phonosig::StatisticChoice::d}};
  sub->add_option("--statistic", c.statistic, "auto, K or D")->transform(CLI::CheckedTransformer(stats).description(""))
      ->type_name("auto|K|D");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phylogenetic signal in phonotactic characters"};
  app.require_subcommand(1);
  RunConfig c;

  auto* extract = app.add_subcommand("extract", "Build character CSVs from segmented wordlists");
  extract->add_option("--wordlist", c.wordlist, "TSV doculect<TAB>form")->required();
  extract->add_option("--classmap", c.classmap, "TSV segment<TAB>place<TAB>major_place<TAB>manner");
  extract->add_option("--mode", c.modes, "binary, fwd, bwd, class-fwd, class-bwd (repeatable)");
  extract->add_option("--output", c.output, "Output directory")->required();

  auto* signal = app.add_subcommand("signal", "Test every character for phylogenetic signal");
  signal->add_option("--tree", c.tree, "Newick tree file")->required();
  signal->add_option("--characters", c.characters, "Character CSV")->required();
  signal->add_option("--output", c.output, "Results CSV")->required();
  add_testing(signal, c);
  add_common(signal, c);

  auto* calibrate = app.add_subcommand("calibrate", "Sweep K over Brownian/noise mixtures");
  calibrate->add_option("--tree", c.tree, "Newick tree file")->required();
  calibrate->add_option("--output", c.output, "Sweep CSV")->required();
  calibrate->add_option("--step", c.step, "Brownian share step")->capture_default_str();
  calibrate->add_option("--traits-per-step", c.traits_per_step, "Traits simulated per step")->capture_default_str();
  calibrate->add_option("--n-perm", c.n_perm, "Permutations per trait (default 1000)");
  calibrate->add_option("--alpha", c.alpha, "Significance level")->capture_default_str();
  calibrate->add_flag("--pseudocount", c.pseudocount, "Report (r+1)/(n+1) p-values");
  add_common(calibrate, c);

  auto* robust = app.add_subcommand("robustness", "Replicate over posterior trees or doculect subsets");
  robust->add_option("--tree", c.tree, "Tree directory (posterior) or tree file (subsets)")->required();
  robust->add_option("--characters", c.characters, "Character CSV (posterior mode)");
  robust->add_option("--wordlist", c.wordlist, "Wordlist TSV (subset modes)");
  robust->add_option("--classmap", c.classmap, "Class map TSV (class modes)");
  robust->add_option("--mode", c.modes, "Extraction mode for subset runs (default fwd)");
  const std::map<std::string, phonosig::SubsetMode> subsets{{"none", phonosig::SubsetMode::none},
                                                            {"every-second", phonosig::SubsetMode::every_second},
                                                            {"middle-50", phonosig::SubsetMode::middle_50}};
  robust->add_option("--subset", c.subset, "none, every-second or middle-50")
      ->transform(CLI::CheckedTransformer(subsets).description(""))
      ->type_name("none|every-second|middle-50");
  robust->add_option("--output", c.output, "Replication CSV")->required();
  add_testing(robust, c);
  add_common(robust, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(phonosig::ExitCode::input);
  }

  if (app.got_subcommand(extract)) c.subcommand = phonosig::Subcommand::extract;
  else if (app.got_subcommand(signal)) c.subcommand = phonosig::Subcommand::signal;
  else if (app.got_subcommand(calibrate)) c.subcommand = phonosig::Subcommand::calibrate;
  else c.subcommand = phonosig::Subcommand::robustness;
  return phonosig::run_command(c, std::cout, std::cerr);
}

#pragma once

// End-to-end runs behind the command-line tool: extraction, signal tests,
// calibration sweeps and robustness replications. Every cmd_* function is a
// deterministic function of its RunConfig.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phonosig/chars.hpp"
#include "phonosig/error.hpp"
#include "phonosig/signal.hpp"
#include "phonosig/tree.hpp"

namespace phonosig {

// Nothing survived filtering or testing.
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int { ok = 0, internal = 1, input = 2, empty = 3 };

enum class Subcommand { extract, signal, calibrate, robustness };
enum class SubsetMode { none, every_second, middle_50 };
enum class StatisticChoice { automatic, k, d };

struct RunConfig {
  Subcommand subcommand = Subcommand::signal;

  // Tree file, or a directory of Newick files for posterior robustness runs.
  std::string tree;
  std::string wordlist;
  std::string classmap;
  std::string characters;
  std::string tip_map;
  // Directory for extract, results CSV otherwise.
  std::string output;

  // extract: any of binary, fwd, bwd, class-fwd, class-bwd. Empty = all that
  // apply. robustness subset runs use the first entry (default fwd).
  std::vector<std::string> modes;

  // Unset: 10,000, or 1,000 for calibrate.
  std::optional<std::size_t> n_perm;
  double alpha = 0.05;
  // Unset: 50 for D, 20 for K.
  std::optional<std::size_t> min_non_na;
  std::optional<std::uint64_t> seed;
  bool normalize = false;
  bool pseudocount = false;
  SubsetMode subset = SubsetMode::none;
  StatisticChoice statistic = StatisticChoice::automatic;

  // calibrate
  double step = 0.01;
  std::size_t traits_per_step = 1000;

  // Write a full-precision JSON sidecar next to the output.
  bool json = false;
  // 0: PHONOSIG_WORKERS or hardware concurrency.
  std::size_t workers = 0;
};

// doculect id -> tip label; ids absent from the map keep their own name.
using TipMap = std::map<std::string, std::string, std::less<>>;
TipMap load_tip_map(const std::string& path);

struct SignalOptions {
  StatisticChoice statistic = StatisticChoice::automatic;
  std::size_t n_perm = 10000;
  double alpha = 0.05;
  std::optional<std::size_t> min_non_na;
  bool normalize = false;
  bool pseudocount = false;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct CharacterResult {
  std::string key;
  // "K" or "D"
  std::string stat;
  std::size_t n_used = 0;
  double value = 0.0;
  // K: permutation p. D: p for D = 1.
  double p = 0.0;
  // NaN for K.
  double p_d_eq_0 = 0.0;
  double p_d_eq_1 = 0.0;
  bool significant = false;
  // Empty for K.
  std::string classification;
  // NaN unless binary.
  double skew = 0.0;
  // NaN unless normalized.
  double lambda = 0.0;
};

struct SignalRun {
  std::string stat;
  std::vector<CharacterResult> results;
  FilterReport filter;
  // Characters that passed the filter but whose statistic was undefined.
  std::vector<std::string> losses;
};

// Doculects must all be tips of the tree (after the tip map). Each character
// gets its own stream derived from the seed and the key, so results do not
// depend on column order or worker count.
SignalRun run_signal(const PhyloTree& tree, const CharacterMatrix& m, const TipMap& tip_map,
                     const SignalOptions& options);

struct GroupSummary {
  std::string group;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double pct_significant = 0.0;
};

// "all" first, then one row per key scheme ("segment" for plain pairs) when
// there is more than one.
std::vector<GroupSummary> summarize_results(const std::vector<CharacterResult>& results);

struct CalibrationRow {
  double p_brownian = 0.0;
  std::size_t n_traits = 0;
  double mean_k = 0.0;
  double sd_k = 0.0;
  double pct_significant = 0.0;
};

struct CalibrationOptions {
  double step = 0.01;
  std::size_t traits_per_step = 1000;
  std::size_t n_perm = 1000;
  double alpha = 0.05;
  bool pseudocount = false;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// p_brownian runs over 0, step, ..., 1; trait t of step i uses stream (i, t).
std::vector<CalibrationRow> calibration_sweep(const PhyloTree& tree, const CalibrationOptions& options);

// Doculect indices of a subset, in their original order. Ranking is by form
// count, largest first, ties by position.
std::vector<std::size_t> select_subset(const std::vector<Doculect>& doculects, SubsetMode mode);

void cmd_extract(const RunConfig& config, std::ostream& out);
void cmd_signal(const RunConfig& config, std::ostream& out);
void cmd_calibrate(const RunConfig& config, std::ostream& out);
void cmd_robustness(const RunConfig& config, std::ostream& out);

// Dispatches on config.subcommand and maps exceptions to exit codes, with
// the message on `err`.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace phonosig

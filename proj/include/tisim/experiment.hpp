#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tisim/scenario.hpp"
#include "tisim/sim.hpp"

namespace tisim {

struct ExperimentOptions {
    std::vector<double> fractions;
    int replications = 1;
    std::uint64_t base_seed = 1;
    bool baseline = true;
    bool controlled = true;
    /// Worker threads; 0 means one per hardware thread, capped by TISIM_THREADS.
    unsigned threads = 0;
};

/// Options taken from the scenario's experiment section.
[[nodiscard]] ExperimentOptions experiment_options(const Scenario& s);

struct RunRecord {
    double fraction = 0;
    bool controlled = false;
    std::uint64_t seed = 0;
    std::vector<Measurement> series;
    std::optional<double> mean_speed_kmh;
};

struct SummaryRow {
    double fraction = 0;
    int replications = 0;
    std::optional<double> baseline_kmh;
    std::optional<double> controlled_kmh;
    /// Mean over seeds of (controlled - baseline) / baseline * 100, paired by seed.
    std::optional<double> improvement_pct;
    std::optional<double> improvement_std;
};

struct ExperimentResult {
    /// Sorted by fraction, mode (baseline first), seed.
    std::vector<RunRecord> runs;
    std::vector<SummaryRow> summary;
};

/// Every fraction x mode x replication, seeds base_seed .. base_seed+r-1 shared
/// by both modes. Independent runs execute on worker threads; the result does
/// not depend on the thread count.
[[nodiscard]] ExperimentResult run_experiment(const Scenario& s, const ExperimentOptions& options);

/// Summary rows recomputed from run records alone.
[[nodiscard]] std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs);

/// fraction,mode,seed,interval,mean_speed_kmh (empty speed for an undefined interval).
[[nodiscard]] std::string runs_csv(const std::vector<RunRecord>& runs);
/// fraction,replications,baseline_kmh,controlled_kmh,improvement_pct,improvement_std
[[nodiscard]] std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Worker count for `requested` (0 = hardware threads), capped by TISIM_THREADS.
[[nodiscard]] unsigned worker_count(unsigned requested, std::size_t jobs);

}  // namespace tisim

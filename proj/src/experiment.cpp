#include "tisim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "tisim/error.hpp"

namespace tisim {

namespace {

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fixed(*v) : std::string(); }

}  // namespace

ExperimentOptions experiment_options(const Scenario& s) {
    ExperimentOptions o;
    o.fractions = s.experiment.fractions;
    o.replications = s.experiment.replications;
    o.base_seed = s.experiment.base_seed;
    return o;
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("TISIM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(cap, &end, 10);
        if (end != cap && *end == '\0' && v >= 1) n = std::min(n, static_cast<unsigned>(v));
    }
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

ExperimentResult run_experiment(const Scenario& s, const ExperimentOptions& options) {
    if (options.replications < 1) throw ValidationError("replications must be at least 1");
    if (!options.baseline && !options.controlled) throw ValidationError("no mode selected");
    for (double f : options.fractions) {
        if (!(f >= 0 && f <= 1)) throw ValidationError("fractions must lie in [0, 1]");
    }
    std::vector<double> fractions = options.fractions;
    std::sort(fractions.begin(), fractions.end());
    fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

    std::vector<RunRecord> jobs;
    for (double f : fractions) {
        for (bool controlled : {false, true}) {
            if (controlled ? !options.controlled : !options.baseline) continue;
            for (int r = 0; r < options.replications; ++r) {
                RunRecord rec;
                rec.fraction = f;
                rec.controlled = controlled;
                rec.seed = options.base_seed + static_cast<std::uint64_t>(r);
                jobs.push_back(std::move(rec));
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                Scenario local = s;
                local.sim.controlled = jobs[i].controlled;
                Simulation sim(local, jobs[i].fraction, jobs[i].seed);
                sim.run();
                jobs[i].series = sim.measurements();
                jobs[i].mean_speed_kmh = overall_mean_speed(jobs[i].series);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n = worker_count(options.threads, jobs.size());
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    ExperimentResult out;
    out.summary = summarize(jobs);
    out.runs = std::move(jobs);
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs) {
    struct Acc {
        std::map<std::uint64_t, double> base, ctrl;
    };
    std::map<double, Acc> by_fraction;
    for (const auto& r : runs) {
        auto& a = by_fraction[r.fraction];
        if (!r.mean_speed_kmh) continue;
        (r.controlled ? a.ctrl : a.base)[r.seed] = *r.mean_speed_kmh;
    }
    auto mean = [](const std::map<std::uint64_t, double>& m) -> std::optional<double> {
        if (m.empty()) return std::nullopt;
        double s = 0;
        for (const auto& [_, v] : m) s += v;
        return s / static_cast<double>(m.size());
    };
    std::vector<SummaryRow> rows;
    for (const auto& [f, a] : by_fraction) {
        SummaryRow row;
        row.fraction = f;
        row.replications = static_cast<int>(std::max(a.base.size(), a.ctrl.size()));
        row.baseline_kmh = mean(a.base);
        row.controlled_kmh = mean(a.ctrl);
        std::vector<double> imp;
        for (const auto& [seed, b] : a.base) {
            auto c = a.ctrl.find(seed);
            if (c != a.ctrl.end() && b > 0) imp.push_back((c->second - b) / b * 100.0);
        }
        if (!imp.empty()) {
            double m = 0;
            for (double x : imp) m += x;
            m /= static_cast<double>(imp.size());
            double ss = 0;
            for (double x : imp) ss += (x - m) * (x - m);
            row.improvement_pct = m;
            row.improvement_std = imp.size() > 1 ? std::sqrt(ss / static_cast<double>(imp.size() - 1)) : 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string runs_csv(const std::vector<RunRecord>& runs) {
    std::string out = "fraction,mode,seed,interval,mean_speed_kmh\n";
    for (const auto& r : runs) {
        for (const auto& m : r.series) {
            out += fixed(r.fraction, 2) + ',' + (r.controlled ? "controlled" : "baseline") + ',' +
                   std::to_string(r.seed) + ',' + std::to_string(m.interval) + ',' +
                   (m.defined ? fixed(m.mean_speed_kmh) : std::string()) + '\n';
        }
    }
    return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "fraction,replications,baseline_kmh,controlled_kmh,improvement_pct,improvement_std\n";
    for (const auto& r : rows) {
        out += fixed(r.fraction, 2) + ',' + std::to_string(r.replications) + ',' + opt(r.baseline_kmh) + ',' +
               opt(r.controlled_kmh) + ',' + opt(r.improvement_pct) + ',' + opt(r.improvement_std) + '\n';
    }
    return out;
}

}  // namespace tisim

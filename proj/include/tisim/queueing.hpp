#pragma once

#include <cstdint>

namespace tisim {

enum class QueueModel { mm1, md1 };

/// Mean wait in queue (excluding service) for Poisson arrivals at rate
/// `lambda` and exponential service at rate `mu`, both per second.
/// Throws UnstableQueue unless 0 <= lambda < mu.
[[nodiscard]] double expected_wait_mm1(double lambda, double mu);

/// Same with deterministic service time 1/mu.
[[nodiscard]] double expected_wait_md1(double lambda, double mu);

[[nodiscard]] double expected_wait(QueueModel model, double lambda, double mu);

struct QueueSimResult {
    double mean_wait = 0;
    std::uint64_t customers = 0;
};

/// Event-driven single-server FIFO simulation over `arrivals` customers.
[[nodiscard]] QueueSimResult simulate_queue(QueueModel model, double lambda, double mu, std::uint64_t arrivals,
                                            std::uint64_t seed);

}  // namespace tisim

#include "tisim/queueing.hpp"

#include <deque>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "tisim/error.hpp"

namespace tisim {

namespace {

void check_stable(double lambda, double mu) {
    if (!(mu > 0) || !(lambda >= 0)) throw UnstableQueue("rates must satisfy lambda >= 0 and mu > 0");
    if (lambda >= mu)
        throw UnstableQueue("arrival rate " + std::to_string(lambda) + " is not below service rate " + std::to_string(mu));
}

}  // namespace

double expected_wait_mm1(double lambda, double mu) {
    check_stable(lambda, mu);
    return lambda / (mu * (mu - lambda));
}

double expected_wait_md1(double lambda, double mu) {
    check_stable(lambda, mu);
    const double rho = lambda / mu;
    return rho / (2 * mu * (1 - rho));
}

double expected_wait(QueueModel model, double lambda, double mu) {
    return model == QueueModel::mm1 ? expected_wait_mm1(lambda, mu) : expected_wait_md1(lambda, mu);
}

QueueSimResult simulate_queue(QueueModel model, double lambda, double mu, std::uint64_t arrivals, std::uint64_t seed) {
    check_stable(lambda, mu);
    QueueSimResult out;
    if (arrivals == 0 || lambda == 0) return out;

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> interarrival(lambda), service(mu);
    auto service_time = [&] { return model == QueueModel::mm1 ? service(rng) : 1.0 / mu; };

    enum class Kind { arrival, departure };
    struct Event {
        double time;
        Kind kind;
        bool operator>(const Event& o) const { return time > o.time; }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::deque<double> waiting;  // arrival times
    bool busy = false;
    std::uint64_t generated = 1;
    double total_wait = 0;

    events.push({interarrival(rng), Kind::arrival});
    while (!events.empty()) {
        const Event e = events.top();
        events.pop();
        if (e.kind == Kind::arrival) {
            if (generated < arrivals) {
                events.push({e.time + interarrival(rng), Kind::arrival});
                ++generated;
            }
            if (busy) {
                waiting.push_back(e.time);
            } else {
                busy = true;
                ++out.customers;
                events.push({e.time + service_time(), Kind::departure});
            }
        } else if (waiting.empty()) {
            busy = false;
        } else {
            total_wait += e.time - waiting.front();
            waiting.pop_front();
            ++out.customers;
            events.push({e.time + service_time(), Kind::departure});
        }
    }
    out.mean_wait = total_wait / static_cast<double>(out.customers);
    return out;
}

}  // namespace tisim

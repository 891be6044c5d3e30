#pragma once

// Seeded Poisson background-traffic source. Arrivals compete with training
// traffic for the shared PON upstream (and, in the baseline, downstream).
//
// Sampling uses mt19937_64 plus an explicit inverse-CDF transform instead of
// std::exponential_distribution: the standard distributions are not
// bit-stable across library implementations, and reports must be
// byte-identical for a given seed on every platform.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "fedslice/pon_model.hpp"

namespace fedslice {

struct BackgroundConfig {
    double load = 0.0;        // rho_bg, fraction of line rate in [0,1)
    double unit_bits = 12000;  // 1500-byte packets
    std::uint64_t seed = 1;

    void validate() const {
        if (load < 0 || load >= 1)
            throw std::invalid_argument("BackgroundConfig: load must be in [0,1)");
        if (unit_bits <= 0)
            throw std::invalid_argument("BackgroundConfig: unit_bits must be > 0");
    }
};

struct BackgroundArrival {
    double time = 0.0;  // generation time at the ONU, seconds
    int onu = 0;
    double bits = 0.0;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa in [0, 1); identical on every conforming platform.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& rng, double rate) {
    return -std::log1p(-uniform01(rng)) / rate;
}

inline int uniform_onu(std::mt19937_64& rng, int num_onus) {
    // Multiply-shift bounded draw; avoids modulo bias and is reproducible.
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(num_onus);
    return static_cast<int>(wide >> 64);
}

}  // namespace detail

/// Draws one exponential interarrival with rate lambda = rho_bg * C / unit.
/// Returns nullopt when the configured load is zero (no arrivals ever).
inline std::optional<double> sample_interarrival(const BackgroundConfig& cfg,
                                                 double capacity_bps,
                                                 std::mt19937_64& rng) {
    if (cfg.load <= 0)
        return std::nullopt;
    const double lambda = cfg.load * capacity_bps / cfg.unit_bits;
    return detail::exponential(rng, lambda);
}

/// Streaming Poisson source: fixed-size units at aggregate rate
/// rho_bg * C / unit_bits, each assigned to an ONU uniformly at random.
/// (seed, config) fully determines the stream.
class BackgroundSource {
public:
    BackgroundSource(const BackgroundConfig& cfg, const PonConfig& pon,
                     double capacity_bps, std::uint64_t seed_salt = 0)
        : cfg_(cfg), num_onus_(pon.num_onus), capacity_(capacity_bps),
          rng_(cfg.seed ^ seed_salt) {
        cfg_.validate();
        if (cfg_.load > 0)
            advance();
    }

    bool exhausted() const { return !next_.has_value(); }
    const BackgroundArrival& peek() const { return *next_; }

    /// Consumes and returns the next arrival.
    std::optional<BackgroundArrival> next() {
        if (!next_)
            return std::nullopt;
        BackgroundArrival a = *next_;
        advance();
        return a;
    }

    /// Returns arrivals strictly before `t_limit`, consuming them.
    template <typename Sink>
    void drain_until(double t_limit, Sink&& sink) {
        while (next_ && next_->time < t_limit) {
            sink(*next_);
            advance();
        }
    }

private:
    void advance() {
        const auto gap = sample_interarrival(cfg_, capacity_, rng_);
        if (!gap) {
            next_.reset();
            return;
        }
        BackgroundArrival a;
        a.time = (next_ ? next_->time : 0.0) + *gap;
        a.onu = detail::uniform_onu(rng_, num_onus_);
        a.bits = cfg_.unit_bits;
        next_ = a;
    }

    BackgroundConfig cfg_;
    int num_onus_;
    double capacity_;
    std::mt19937_64 rng_;
    std::optional<BackgroundArrival> next_;
};

/// Materializes the stream over [0, horizon). Expected total volume is
/// rho_bg * C * horizon bits.
inline std::vector<BackgroundArrival> generate_background(const BackgroundConfig& cfg,
                                                          const PonConfig& pon,
                                                          double horizon_s,
                                                          std::uint64_t seed_salt = 0) {
    if (horizon_s <= 0)
        throw std::invalid_argument("generate_background: horizon must be > 0");
    std::vector<BackgroundArrival> out;
    BackgroundSource src(cfg, pon, pon.uplink_bps, seed_salt);
    src.drain_until(horizon_s, [&](const BackgroundArrival& a) { out.push_back(a); });
    return out;
}

}  // namespace fedslice

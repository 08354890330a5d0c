#pragma once
/**
 * trace.hpp - synthetic atom-count traces for schedule and step-time studies.
 *
 * A trace is just a vector of per-sample atom counts. Log-normal matches the
 * single-source case; the bimodal mixture models a corpus whose subsets peak
 * at very different system sizes.
 */

#include <cstdint>
#include <vector>

#include "lamm/core.hpp"

namespace lamm::trace {

enum class Kind { constant, uniform, lognormal, bimodal };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& s);

struct TraceSpec {
    Kind kind = Kind::lognormal;
    std::int64_t count = 1000;
    std::int64_t min_atoms = 1;    // clamp; uniform draws inside [min, max]
    std::int64_t max_atoms = 300;
    double constant_atoms = 15.0;  // constant
    double mode = 15.0;            // lognormal: mode of the distribution
    double sigma = 0.45;           //   log-space sigma
    double mode_a = 15.0;          // bimodal mixture of two log-normals
    double sigma_a = 0.30;
    double mode_b = 160.0;
    double sigma_b = 0.30;
    double weight_a = 0.5;
};

void validate_trace(const TraceSpec& spec);

std::vector<std::int64_t> make_trace(const TraceSpec& spec, std::uint64_t seed);

}  // namespace lamm::trace

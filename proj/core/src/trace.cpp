#include "lamm/trace.hpp"

#include <algorithm>
#include <cmath>

#include "lamm/rng.hpp"

namespace lamm::trace {

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::constant: return "constant";
        case Kind::uniform: return "uniform";
        case Kind::lognormal: return "lognormal";
        case Kind::bimodal: return "bimodal";
    }
    throw std::logic_error("unreachable trace kind");
}

Kind kind_from_string(const std::string& s) {
    if (s == "constant") return Kind::constant;
    if (s == "uniform") return Kind::uniform;
    if (s == "lognormal") return Kind::lognormal;
    if (s == "bimodal") return Kind::bimodal;
    throw InputError("unknown trace kind \"" + s + "\"");
}

void validate_trace(const TraceSpec& spec) {
    if (spec.count < 1) throw InputError("trace: count must be >= 1");
    if (spec.min_atoms < 1 || spec.max_atoms < spec.min_atoms)
        throw InputError("trace: bad atom bounds");
    const double modes[] = {spec.constant_atoms, spec.mode, spec.mode_a, spec.mode_b};
    for (double m : modes)
        if (!(m >= 1.0)) throw InputError("trace: modes must be >= 1");
    if (!(spec.sigma > 0.0) || !(spec.sigma_a > 0.0) || !(spec.sigma_b > 0.0))
        throw InputError("trace: sigmas must be positive");
    if (!(spec.weight_a >= 0.0 && spec.weight_a <= 1.0))
        throw InputError("trace: weight_a must be in [0, 1]");
}

namespace {

std::int64_t lognormal_draw(double mode, double sigma, Rng& rng) {
    const double mu = std::log(mode) + sigma * sigma;  // mode = exp(mu - sigma^2)
    return std::llround(std::exp(rng.normal(mu, sigma)));
}

}  // namespace

std::vector<std::int64_t> make_trace(const TraceSpec& spec, std::uint64_t seed) {
    validate_trace(spec);
    Rng rng(seed);
    std::vector<std::int64_t> atoms(static_cast<std::size_t>(spec.count));
    for (auto& a : atoms) {
        std::int64_t v = 0;
        switch (spec.kind) {
            case Kind::constant:
                v = std::llround(spec.constant_atoms);
                break;
            case Kind::uniform:
                v = spec.min_atoms +
                    static_cast<std::int64_t>(rng.bounded(
                        static_cast<std::uint64_t>(spec.max_atoms - spec.min_atoms + 1)));
                break;
            case Kind::lognormal:
                v = lognormal_draw(spec.mode, spec.sigma, rng);
                break;
            case Kind::bimodal:
                v = rng.uniform() < spec.weight_a ? lognormal_draw(spec.mode_a, spec.sigma_a, rng)
                                                  : lognormal_draw(spec.mode_b, spec.sigma_b, rng);
                break;
        }
        a = std::clamp(v, spec.min_atoms, spec.max_atoms);
    }
    return atoms;
}

}  // namespace lamm::trace

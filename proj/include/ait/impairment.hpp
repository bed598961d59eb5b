#pragma once

#include <complex>
#include <span>
#include <variant>
#include <vector>

#include "ait/canonical.hpp"
#include "ait/rng.hpp"

namespace ait::aicore {

using Complex = std::complex<double>;

/// Block: every symbol rotated by e^{i theta} (a constant phase offset).
/// Progressive: symbol k rotated by e^{i k theta} (frequency offset).
enum class CfoModel { Block, Progressive };

struct Cfo {
  double theta = 0;  // radians (per symbol for Progressive)
  CfoModel model = CfoModel::Block;
  friend bool operator==(const Cfo&, const Cfo&) = default;
};

/// I' = I, Q' = g * (Q cos(phi) - I sin(phi)) with g = 10^(gain_db / 20).
struct IqImbalance {
  double gain_db = 0;
  double phase_deg = 0;
  friend bool operator==(const IqImbalance&, const IqImbalance&) = default;
};

enum class Tail { Gaussian, HeavyTail };

/// Additive complex noise of total power `power` (power/2 per component).
/// HeavyTail draws Student-t (3 dof) samples scaled to the same power.
struct Interference {
  double power = 0;
  Tail tail = Tail::Gaussian;
  friend bool operator==(const Interference&, const Interference&) = default;
};

using Impairment = std::variant<Cfo, IqImbalance, Interference>;

/// Throws ConfigError if cfo is outside [-pi, pi], gain outside [-6, 6] dB
/// or power negative.
void validate(const Impairment& imp);

Json to_json(const Impairment& imp);
/// {"kind":"cfo","cfo":t,"model":"block"|"progressive"} |
/// {"kind":"iq_imbalance","gain_db":g,"phase_deg":p} |
/// {"kind":"interference","power":p,"tail":"gaussian"|"heavy_tail"}.
/// Throws SchemaError on malformed input, ConfigError on out-of-range values.
Impairment impairment_from_json(const Json& j);

/// Output has the same length as the input. Only Interference consumes rng.
std::vector<Complex> apply_impairment(std::span<const Complex> symbols, const Impairment& imp, CounterRng& rng);

}  // namespace ait::aicore

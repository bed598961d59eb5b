#include "ait/impairment.hpp"

#include <cmath>
#include <numbers>

#include "ait/error.hpp"

namespace ait::aicore {

namespace {

double number(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw SchemaError(std::string("impairment.") + key + " must be a number");
  return j[key].get<double>();
}

// Student-t with 3 degrees of freedom; variance 3.
double student_t3(CounterRng& rng) {
  double z = rng.normal();
  double chi2 = 0;
  for (int i = 0; i < 3; ++i) {
    double n = rng.normal();
    chi2 += n * n;
  }
  return z / std::sqrt(chi2 / 3.0);
}

}  // namespace

void validate(const Impairment& imp) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Cfo>) {
          if (!(std::abs(v.theta) <= std::numbers::pi)) throw ConfigError("cfo must lie in [-pi, pi]");
        } else if constexpr (std::is_same_v<T, IqImbalance>) {
          if (!(v.gain_db >= -6.0 && v.gain_db <= 6.0)) throw ConfigError("iq gain_db must lie in [-6, 6]");
          if (!std::isfinite(v.phase_deg)) throw ConfigError("iq phase_deg must be finite");
        } else {
          if (!(v.power >= 0.0) || !std::isfinite(v.power)) throw ConfigError("interference power must be >= 0");
        }
      },
      imp);
}

Json to_json(const Impairment& imp) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Cfo>)
          return {{"kind", "cfo"}, {"cfo", v.theta}, {"model", v.model == CfoModel::Block ? "block" : "progressive"}};
        else if constexpr (std::is_same_v<T, IqImbalance>)
          return {{"kind", "iq_imbalance"}, {"gain_db", v.gain_db}, {"phase_deg", v.phase_deg}};
        else
          return {{"kind", "interference"}, {"power", v.power}, {"tail", v.tail == Tail::Gaussian ? "gaussian" : "heavy_tail"}};
      },
      imp);
}

Impairment impairment_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) throw SchemaError("impairment needs a string 'kind'");
  auto kind = j["kind"].get<std::string>();
  Impairment imp;
  if (kind == "cfo") {
    Cfo c{number(j, "cfo")};
    if (j.contains("model")) {
      auto m = j["model"].is_string() ? j["model"].get<std::string>() : "";
      if (m == "block")
        c.model = CfoModel::Block;
      else if (m == "progressive")
        c.model = CfoModel::Progressive;
      else
        throw SchemaError("impairment.model must be 'block' or 'progressive'");
    }
    imp = c;
  } else if (kind == "iq_imbalance") {
    imp = IqImbalance{number(j, "gain_db"), number(j, "phase_deg")};
  } else if (kind == "interference") {
    Interference in{number(j, "power")};
    if (j.contains("tail")) {
      auto t = j["tail"].is_string() ? j["tail"].get<std::string>() : "";
      if (t == "gaussian")
        in.tail = Tail::Gaussian;
      else if (t == "heavy_tail")
        in.tail = Tail::HeavyTail;
      else
        throw SchemaError("impairment.tail must be 'gaussian' or 'heavy_tail'");
    }
    imp = in;
  } else {
    throw SchemaError("unknown impairment kind '" + kind + "'");
  }
  validate(imp);
  return imp;
}

std::vector<Complex> apply_impairment(std::span<const Complex> symbols, const Impairment& imp, CounterRng& rng) {
  std::vector<Complex> out(symbols.begin(), symbols.end());
  if (const auto* c = std::get_if<Cfo>(&imp)) {
    if (c->theta == 0.0) return out;
    if (c->model == CfoModel::Block) {
      const Complex rot = std::polar(1.0, c->theta);
      for (auto& s : out) s *= rot;
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) out[k] *= std::polar(1.0, static_cast<double>(k) * c->theta);
    }
  } else if (const auto* iq = std::get_if<IqImbalance>(&imp)) {
    double g = std::pow(10.0, iq->gain_db / 20.0);
    double phi = iq->phase_deg * std::numbers::pi / 180.0;
    for (auto& s : out) s = Complex(s.real(), g * (s.imag() * std::cos(phi) - s.real() * std::sin(phi)));
  } else if (const auto* in = std::get_if<Interference>(&imp)) {
    if (in->power == 0.0) return out;
    double sigma = std::sqrt(in->power / 2.0);
    for (auto& s : out) {
      double re, im;
      if (in->tail == Tail::Gaussian) {
        re = rng.normal();
        im = rng.normal();
      } else {
        re = student_t3(rng) / std::sqrt(3.0);
        im = student_t3(rng) / std::sqrt(3.0);
      }
      s += Complex(sigma * re, sigma * im);
    }
  }
  return out;
}

}  // namespace ait::aicore

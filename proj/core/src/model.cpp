#include "mkvsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "mkvsim/errors.hpp"
#include "mkvsim/measures.hpp"

namespace mkvsim {

namespace {

constexpr int max_dim = 16;

double sqnorm_span(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void check_state(int i, int states) {
  require(i >= 0 && i < states, errc::invalid_argument,
          "state index " + std::to_string(i) + " out of range");
}

const std::vector<double>& param(const ParamTable& t, const std::string& key, int expect_len) {
  auto it = t.find(key);
  require(it != t.end(), errc::invalid_argument, "missing model parameter '" + key + "'");
  require(int(it->second.size()) == expect_len, errc::invalid_argument,
          "model parameter '" + key + "' must have length " + std::to_string(expect_len));
  return it->second;
}

void reject_unknown(const ParamTable& t, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : t) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    require(ok, errc::invalid_argument, "unknown model parameter '" + key + "'");
  }
}

}  // namespace

MeasureView::MeasureView(std::span<const double> flat, std::size_t count, int dim)
    : flat_(flat), count_(count), dim_(dim) {
  require(dim >= 1, errc::invalid_argument, "measure view dimension must be >= 1");
  require(count >= 1, errc::invalid_argument, "measure view must be nonempty");
  require(flat.size() == count * std::size_t(dim), errc::size_mismatch,
          "measure view buffer does not match count x dim");
  mean_.assign(dim, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    auto p = point(k);
    for (int c = 0; c < dim; ++c) mean_[c] += p[c];
    m2_ += sqnorm_span(p);
  }
  for (auto& m : mean_) m /= double(count);
  m2_ /= double(count);
}

Coefficients::Coefficients(int dim, int states, JumpSpec jumps, bool g_state_free)
    : dim_(dim), states_(states), jumps_(std::move(jumps)), g_state_free_(g_state_free) {
  require(dim >= 1 && dim <= max_dim, errc::invalid_argument,
          "coefficient dimension must be in [1, " + std::to_string(max_dim) + "]");
  require(states >= 1, errc::invalid_argument, "state count must be >= 1");
  if (jumps_.rate > 0.0) {
    require(jumps_.dim() == dim, errc::dimension_mismatch,
            "jump mark dimension does not match model dimension");
    // fixed quadrature nodes for the default compensator
    constexpr int nodes = 256;
    auto qs = RngStream::from_root(0x71adc0de).derive("quadrature", 0);
    quad_marks_.resize(std::size_t(nodes) * dim);
    for (int k = 0; k < nodes; ++k)
      jumps_.marks.sample(qs, {quad_marks_.data() + std::size_t(k) * dim, std::size_t(dim)});
  }
}

void Coefficients::jump_compensator(std::span<const double> x, const MeasureView& mu, int i,
                                    std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (jumps_.rate == 0.0 || quad_marks_.empty()) return;
  const std::size_t nodes = quad_marks_.size() / std::size_t(dim_);
  std::vector<double> g(dim_);
  for (std::size_t k = 0; k < nodes; ++k) {
    jump_coeff(x, mu, i, {quad_marks_.data() + k * std::size_t(dim_), std::size_t(dim_)},
               {g.data(), g.size()});
    for (int c = 0; c < dim_; ++c) out[c] += g[c];
  }
  for (int c = 0; c < dim_; ++c) out[c] *= jumps_.rate / double(nodes);
}

namespace {

// b = a_i (mean - x) + c_i, sigma = s_i I, g = gamma_i z.
class SwitchingMfOu : public Coefficients {
public:
  SwitchingMfOu(int dim, int states, JumpSpec jumps, std::vector<double> a, std::vector<double> c,
                std::vector<double> s, std::vector<double> gamma, double kappa, bool gxmu)
      : Coefficients(dim, states, std::move(jumps), !gxmu),
        a_(std::move(a)),
        c_(std::move(c)),
        s_(std::move(s)),
        gamma_(std::move(gamma)),
        kappa_(kappa),
        gxmu_(gxmu) {
    if (jumps_ref().rate > 0.0) {
      mark_mean_ = jumps_ref().mark_mean();
      if (gxmu_) mark_abs_ = mark_abs_moment();
    }
  }

  void drift(std::span<const double> x, const MeasureView& mu, int i,
             std::span<double> out) const override {
    check_state(i, states());
    auto m = mu.mean();
    for (int c = 0; c < dim(); ++c) out[c] = a_[i] * (m[c] - x[c]) + c_[i];
  }

  void diffusion(std::span<const double>, const MeasureView&, int i,
                 std::span<double> out) const override {
    check_state(i, states());
    std::fill(out.begin(), out.end(), 0.0);
    for (int c = 0; c < dim(); ++c) out[std::size_t(c) * dim() + c] = s_[i];
  }

  void jump_coeff(std::span<const double> x, const MeasureView& mu, int i,
                  std::span<const double> z, std::span<double> out) const override {
    check_state(i, states());
    for (int c = 0; c < dim(); ++c) out[c] = gamma_[i] * z[c];
    if (gxmu_) {
      double zn = std::sqrt(sqnorm_span(z));
      auto m = mu.mean();
      for (int c = 0; c < dim(); ++c) out[c] += kappa_ * (m[c] - x[c]) * zn;
    }
  }

  void jump_compensator(std::span<const double> x, const MeasureView& mu, int i,
                        std::span<double> out) const override {
    check_state(i, states());
    const double rate = jumps_ref().rate;
    if (rate == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    for (int c = 0; c < dim(); ++c) out[c] = gamma_[i] * rate * mark_mean_[c];
    if (gxmu_) {
      auto m = mu.mean();
      for (int c = 0; c < dim(); ++c) out[c] += kappa_ * (m[c] - x[c]) * rate * mark_abs_;
    }
  }

private:
  const JumpSpec& jumps_ref() const { return jumps(); }

  double mark_abs_moment() const {
    // closed form when available, else the fixed quadrature nodes
    try {
      return jumps_ref().marks.abs_moment();
    } catch (const Error&) {
      constexpr int nodes = 4096;
      auto qs = RngStream::from_root(0x71adc0de).derive("abs-moment", 0);
      std::vector<double> z(dim());
      double s = 0.0;
      for (int k = 0; k < nodes; ++k) {
        jumps_ref().marks.sample(qs, {z.data(), z.size()});
        s += std::sqrt(sqnorm_span({z.data(), z.size()}));
      }
      return s / nodes;
    }
  }

  std::vector<double> a_, c_, s_, gamma_;
  double kappa_;
  bool gxmu_;
  std::vector<double> mark_mean_;
  double mark_abs_ = 0.0;
};

// State-indexed constants: b = b_i, sigma = sigma_i I, g = g_i (mark-independent).
class ConstantModel : public Coefficients {
public:
  ConstantModel(int dim, int states, JumpSpec jumps, std::vector<double> b, std::vector<double> s,
                std::vector<double> g)
      : Coefficients(dim, states, std::move(jumps), true),
        b_(std::move(b)),
        s_(std::move(s)),
        g_(std::move(g)) {}

  void drift(std::span<const double>, const MeasureView&, int i,
             std::span<double> out) const override {
    check_state(i, states());
    std::fill(out.begin(), out.end(), b_[i]);
  }

  void diffusion(std::span<const double>, const MeasureView&, int i,
                 std::span<double> out) const override {
    check_state(i, states());
    std::fill(out.begin(), out.end(), 0.0);
    for (int c = 0; c < dim(); ++c) out[std::size_t(c) * dim() + c] = s_[i];
  }

  void jump_coeff(std::span<const double>, const MeasureView&, int i, std::span<const double>,
                  std::span<double> out) const override {
    check_state(i, states());
    std::fill(out.begin(), out.end(), g_[i]);
  }

  void jump_compensator(std::span<const double>, const MeasureView&, int i,
                        std::span<double> out) const override {
    check_state(i, states());
    std::fill(out.begin(), out.end(), g_[i] * jumps().rate);
  }

private:
  std::vector<double> b_, s_, g_;
};

}  // namespace

std::shared_ptr<Coefficients> builtin_model(const std::string& name, const ParamTable& params,
                                            int dim, int states, JumpSpec jumps) {
  if (name == "switching-mf-ou" || name == "switching-mf-ou-gxmu") {
    const bool gxmu = (name == "switching-mf-ou-gxmu");
    if (gxmu)
      reject_unknown(params, {"a", "c", "s", "gamma", "kappa"});
    else
      reject_unknown(params, {"a", "c", "s", "gamma"});
    auto a = param(params, "a", states);
    auto c = param(params, "c", states);
    auto s = param(params, "s", states);
    auto gamma = param(params, "gamma", states);
    double kappa = gxmu ? param(params, "kappa", 1)[0] : 0.0;
    return std::make_shared<SwitchingMfOu>(dim, states, std::move(jumps), a, c, s, gamma, kappa,
                                           gxmu);
  }
  if (name == "constant") {
    reject_unknown(params, {"b", "sigma", "g"});
    auto b = param(params, "b", states);
    auto s = param(params, "sigma", states);
    auto g = param(params, "g", states);
    return std::make_shared<ConstantModel>(dim, states, std::move(jumps), b, s, g);
  }
  raise(errc::unknown_model, "no builtin model named '" + name + "'");
}

AveragedCoefficients::AveragedCoefficients(std::shared_ptr<const Coefficients> base, ProbVector pi)
    : Coefficients(base->dim(), 1, base->jumps(), base->g_state_free()),
      base_(std::move(base)),
      pi_(std::move(pi)) {
  require(pi_.size() == base_->states(), errc::state_mismatch,
          "invariant measure length does not match the model's state count");
}

void AveragedCoefficients::drift(std::span<const double> x, const MeasureView& mu, int,
                                 std::span<double> out) const {
  double tmp[max_dim];
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < base_->states(); ++i) {
    base_->drift(x, mu, i, {tmp, std::size_t(dim())});
    for (int c = 0; c < dim(); ++c) out[c] += pi_.w[i] * tmp[c];
  }
}

void AveragedCoefficients::diffusion(std::span<const double> x, const MeasureView& mu, int,
                                     std::span<double> out) const {
  double tmp[max_dim * max_dim];
  const std::size_t nn = std::size_t(dim()) * dim();
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < base_->states(); ++i) {
    base_->diffusion(x, mu, i, {tmp, nn});
    for (std::size_t c = 0; c < nn; ++c) out[c] += pi_.w[i] * tmp[c];
  }
}

void AveragedCoefficients::jump_coeff(std::span<const double> x, const MeasureView& mu, int,
                                      std::span<const double> z, std::span<double> out) const {
  require(base_->g_state_free(), errc::g_not_state_free,
          "averaged jump coefficient requires a state-free g");
  double tmp[max_dim];
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < base_->states(); ++i) {
    base_->jump_coeff(x, mu, i, z, {tmp, std::size_t(dim())});
    for (int c = 0; c < dim(); ++c) out[c] += pi_.w[i] * tmp[c];
  }
}

void AveragedCoefficients::jump_compensator(std::span<const double> x, const MeasureView& mu, int,
                                            std::span<double> out) const {
  require(base_->g_state_free(), errc::g_not_state_free,
          "averaged jump compensator requires a state-free g");
  double tmp[max_dim];
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < base_->states(); ++i) {
    base_->jump_compensator(x, mu, i, {tmp, std::size_t(dim())});
    for (int c = 0; c < dim(); ++c) out[c] += pi_.w[i] * tmp[c];
  }
}

std::shared_ptr<AveragedCoefficients> average(std::shared_ptr<const Coefficients> coeffs,
                                              const ProbVector& pi) {
  return std::make_shared<AveragedCoefficients>(std::move(coeffs), pi);
}

namespace {

void sample_in_ball(RngStream& s, double radius, std::span<double> out) {
  double n2 = 0.0;
  for (auto& x : out) {
    x = s.normal();
    n2 += x * x;
  }
  double r = radius * std::pow(s.uniform01(), 1.0 / double(out.size()));
  double scale = (n2 > 0.0) ? r / std::sqrt(n2) : 0.0;
  for (auto& x : out) x *= scale;
}

}  // namespace

AssumptionReport validate_assumptions(const Coefficients& coeffs, int probes, double radius,
                                      const RngStream& stream) {
  require(probes >= 100, errc::invalid_argument, "assumption validation needs >= 100 probes");
  require(radius > 0.0, errc::invalid_argument, "probe radius must be positive");

  const int d = coeffs.dim();
  const std::size_t nn = std::size_t(d) * d;
  constexpr std::size_t cloud = 12;
  AssumptionReport rep;
  rep.probes = probes;
  rep.envelope_declared = coeffs.jumps().envelope.has_value();

  std::vector<double> x(d), y(d), mu_pts(cloud * d), nu_pts(cloud * d);
  std::vector<double> bx(d), by(d), sx(nn), sy(nn), gx(d), gy(d), z(d);

  for (int p = 0; p < probes; ++p) {
    auto ps = stream.derive("probe", std::uint64_t(p));
    sample_in_ball(ps, radius, x);
    sample_in_ball(ps, radius, y);
    for (std::size_t k = 0; k < cloud; ++k) {
      sample_in_ball(ps, radius, {mu_pts.data() + k * d, std::size_t(d)});
      sample_in_ball(ps, radius, {nu_pts.data() + k * d, std::size_t(d)});
    }
    MeasureView mu(mu_pts, cloud, d), nu(nu_pts, cloud, d);
    const int i = p % coeffs.states();

    coeffs.drift(x, mu, i, bx);
    coeffs.drift(y, nu, i, by);
    coeffs.diffusion(x, mu, i, sx);
    coeffs.diffusion(y, nu, i, sy);

    double num = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = bx[c] - by[c];
      num += t * t;
    }
    for (std::size_t c = 0; c < nn; ++c) {
      double t = sx[c] - sy[c];
      num += t * t;
    }
    double dx2 = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = x[c] - y[c];
      dx2 += t * t;
    }
    auto ma = EmpiricalMeasure::from_flat(d, mu_pts);
    auto mb = EmpiricalMeasure::from_flat(d, nu_pts);
    double w2 = w2_assignment(ma, mb);
    double den = dx2 + w2 * w2;
    if (den > 1e-12 && num / den > rep.k1) {
      rep.k1 = num / den;
      rep.k1_x = x;
      rep.k1_y = y;
      rep.k1_state = i;
    }

    double growth_num = 0.0;
    for (int c = 0; c < d; ++c) growth_num += bx[c] * bx[c];
    for (std::size_t c = 0; c < nn; ++c) growth_num += sx[c] * sx[c];
    double growth_den = 1.0 + sqnorm_span({x.data(), x.size()}) + mu.second_moment();
    rep.k2 = std::max(rep.k2, growth_num / growth_den);

    if (coeffs.jumps().rate > 0.0) {
      coeffs.jumps().marks.sample(ps, z);
      coeffs.jump_coeff(x, mu, i, z, gx);
      if (rep.envelope_declared) {
        double zn = std::sqrt(sqnorm_span({z.data(), z.size()}));
        double bound = (*coeffs.jumps().envelope)(zn);
        double gn = std::sqrt(sqnorm_span({gx.data(), gx.size()}));
        if (gn > bound + 1e-12) {
          std::string w = "|g| = " + std::to_string(gn) + " > h = " + std::to_string(bound) +
                          " at state " + std::to_string(i) + ", z = (";
          for (int c = 0; c < d; ++c) w += (c ? "," : "") + std::to_string(z[c]);
          raise(errc::envelope_violated, w + ")");
        }
      }
      if (coeffs.g_state_free()) {
        coeffs.jump_coeff(y, nu, i, z, gy);
        for (int c = 0; c < d; ++c)
          require(std::fabs(gx[c] - gy[c]) <= 1e-12, errc::validation_error,
                  "g_state_free is set but g depends on (x, mu)");
      }
    }
  }
  return rep;
}

}  // namespace mkvsim

#include "robust_coords/gpa.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "robust_coords/procrustes.hpp"

namespace robust_coords {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void AlsOptions::validate() const {
  if (!(tol > 0) || !std::isfinite(tol)) throw InvalidArgument("ALS tolerance must be finite and positive");
  if (min_iter < 0) throw InvalidArgument("min_iter must be non-negative");
  if (max_iter < std::max(1, min_iter)) throw InvalidArgument("max_iter must be at least max(1, min_iter)");
}

namespace {

Mask support_of(const ArrayXd& counts) {
  std::vector<std::uint8_t> present(static_cast<std::size_t>(counts.size()));
  for (Index j = 0; j < counts.size(); ++j) present[static_cast<std::size_t>(j)] = counts(j) > 0 ? 1 : 0;
  return Mask(std::move(present));
}

// zero the absent columns in place
void apply_mask(MatrixXd& m, const ArrayXd& w) { m.array().rowwise() *= w.transpose(); }

MatrixXd mean_of(const std::vector<MatrixXd>& ys, const ArrayXd& counts) {
  MatrixXd z = MatrixXd::Zero(ys.front().rows(), ys.front().cols());
  for (const auto& y : ys) z += y;
  ArrayXd inv = (counts > 0).select(counts.inverse(), 0.0);
  z.array().rowwise() *= inv.transpose();
  return z;
}

double loss_of(const std::vector<MatrixXd>& ys, const std::vector<ArrayXd>& ws, const MatrixXd& z) {
  double total = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    MatrixXd r = ys[i] - z;
    apply_mask(r, ws[i]);
    total += r.squaredNorm();
  }
  return total / static_cast<double>(ys.size());
}

// Working state: X_i centered on its own centroid a_i, so g_i x = Q_i (x - a_i) + t_i.
struct Sweep {
  const GpaProblem& problem;
  Index k, d, n;
  std::vector<ArrayXd> w;
  std::vector<VectorXd> a;
  std::vector<MatrixXd> xc;
  std::vector<MatrixXd> q;
  std::vector<VectorXd> t;
  std::vector<MatrixXd> y;
  MatrixXd z;

  explicit Sweep(const GpaProblem& p) : problem(p), k(p.size()), d(p.dim()), n(p.n_global()) {
    for (const auto& x : p.configs()) {
      w.push_back(x.mask().weights());
      auto [c, centre] = center(x);
      a.push_back(centre);
      xc.push_back(c.matrix());
      q.push_back(MatrixXd::Identity(d, d));
      t.push_back(VectorXd::Zero(d));
    }
    for (Index i = 0; i < k; ++i) y.push_back(image(i));
    z = mean_of(y, p.counts());
  }

  MatrixXd image(Index i) const {
    MatrixXd m = (q[i] * xc[i]).colwise() + t[i];
    apply_mask(m, w[i]);
    return m;
  }

  double loss() const { return loss_of(y, w, z); }

  void replace(Index i) {
    MatrixXd fresh = image(i);
    MatrixXd delta = fresh - y[i];
    ArrayXd inv = (problem.counts() > 0).select(problem.counts().inverse(), 0.0);
    delta.array().rowwise() *= inv.transpose();
    z += delta;
    y[i] = std::move(fresh);
  }

  VectorXd masked_centroid(const MatrixXd& m, Index i) const {
    return (m.array().rowwise() * w[i].transpose()).matrix().rowwise().sum() / w[i].sum();
  }

  void basic() {
    for (Index i = 0; i < k; ++i) {
      const VectorXd b = masked_centroid(z, i);
      MatrixXd target = z.colwise() - b;
      apply_mask(target, w[i]);
      q[i] = polar_factor(target * xc[i].transpose());
      t[i] = b;
    }
    for (Index i = 0; i < k; ++i) y[i] = image(i);
    z = mean_of(y, problem.counts());
  }

  void refined() {
    const double kk = static_cast<double>(k);
    for (Index i = 0; i < k; ++i) {
      q[i] = polar_factor((z - y[i] / kk) * xc[i].transpose());
      replace(i);
    }
  }

  void missing(MissingPointsUpdate rule) {
    const ArrayXd& counts = problem.counts();
    for (Index i = 0; i < k; ++i) {
      if (rule == MissingPointsUpdate::block_exact) {
        // weight 1 - 1/k_j, target (k_j Z_j - Y_i(j)) / (k_j - 1): the mean of the others
        ArrayXd weight = ArrayXd::Zero(n);
        MatrixXd target = MatrixXd::Zero(d, n);
        for (Index j = 0; j < n; ++j) {
          if (w[i](j) == 0 || counts(j) < 2) continue;
          weight(j) = 1.0 - 1.0 / counts(j);
          target.col(j) = (counts(j) * z.col(j) - y[i].col(j)) / (counts(j) - 1.0);
        }
        const double total = weight.sum();
        if (total <= 0) continue;  // nothing shared with the others
        const VectorXd mbar = (target.array().rowwise() * weight.transpose()).matrix().rowwise().sum() / total;
        const VectorXd xbar = (xc[i].array().rowwise() * weight.transpose()).matrix().rowwise().sum() / total;
        MatrixXd tc = target.colwise() - mbar;
        MatrixXd xw = xc[i].colwise() - xbar;
        xw.array().rowwise() *= weight.transpose();
        q[i] = polar_factor(tc * xw.transpose());
        t[i] = mbar - q[i] * xbar;
      } else {
        const VectorXd b = masked_centroid(z, i);
        const ArrayXd inv = (counts > 0).select(counts.inverse(), 0.0);
        MatrixXd zb = z.colwise() - b;
        apply_mask(zb, w[i]);
        MatrixXd own = rule == MissingPointsUpdate::masked_refined ? MatrixXd(q[i] * xc[i]) : xc[i];
        own.array().rowwise() *= (inv * w[i]).transpose();
        const MatrixXd wm = zb - own;
        const MatrixXd rhs = rule == MissingPointsUpdate::masked_refined ? xc[i] : MatrixXd(q[i] * xc[i]);
        q[i] = polar_factor(wm * rhs.transpose());
        t[i] = b;
      }
      replace(i);
    }
  }

  void step() {
    switch (problem.options().variant) {
      case AlsVariant::basic: basic(); break;
      case AlsVariant::refined: refined(); break;
      case AlsVariant::missing_points: missing(problem.options().update); break;
    }
  }

  std::vector<RigidMotion> motions() const {
    std::vector<RigidMotion> out;
    for (Index i = 0; i < k; ++i) out.push_back({q[i], t[i] - q[i] * a[i]});
    return out;
  }
};

void check_directions(const GpaProblem& problem, std::span<const MatrixXd> directions) {
  if (!problem.full_domain()) throw InvalidArgument("loss derivatives need full-domain configurations");
  if (static_cast<Index>(directions.size()) != problem.size())
    throw DimensionMismatch("one direction per configuration is required");
  for (const auto& m : directions) {
    if (m.rows() != problem.dim() || m.cols() != problem.dim())
      throw DimensionMismatch("direction has the wrong shape");
    if ((m + m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) throw NotAntisymmetric();
  }
}

}  // namespace

GpaProblem::GpaProblem(std::vector<Configuration> configs, AlsOptions options)
    : configs_(std::move(configs)), options_(options) {
  options_.validate();
  if (configs_.empty()) throw DroppedAllIndices();
  const Index d = configs_.front().dim();
  const Index n = configs_.front().n_global();
  counts_ = ArrayXd::Zero(n);
  for (const auto& x : configs_) {
    if (x.dim() != d) throw DimensionMismatch("configurations have different dimensions");
    if (x.n_global() != n) throw DimensionMismatch("configurations have different global sizes");
    counts_ += x.mask().weights();
    full_domain_ = full_domain_ && x.mask().is_full();
  }
  support_ = support_of(counts_);
  if (options_.variant == AlsVariant::refined && !full_domain_)
    throw InvalidArgument("the refined variant needs full-domain configurations");
}

std::vector<Configuration> transformed_configs(const GpaProblem& problem, std::span<const RigidMotion> motions) {
  if (static_cast<Index>(motions.size()) != problem.size())
    throw DimensionMismatch("one motion per configuration is required");
  std::vector<Configuration> out;
  for (Index i = 0; i < problem.size(); ++i) {
    if (motions[i].dim() != problem.dim()) throw DimensionMismatch("motion has the wrong dimension");
    out.push_back(motions[i].apply(problem.config(i)));
  }
  return out;
}

Configuration masked_mean(const GpaProblem& problem, std::span<const RigidMotion> motions) {
  std::vector<MatrixXd> ys;
  for (auto& c : transformed_configs(problem, motions)) ys.push_back(c.matrix());
  return Configuration(mean_of(ys, problem.counts()), problem.support());
}

double gpa_loss(const GpaProblem& problem, std::span<const RigidMotion> motions) {
  std::vector<MatrixXd> ys;
  std::vector<ArrayXd> ws;
  for (auto& c : transformed_configs(problem, motions)) {
    ys.push_back(c.matrix());
    ws.push_back(c.mask().weights());
  }
  return loss_of(ys, ws, mean_of(ys, problem.counts()));
}

AlignmentResult als_align(const GpaProblem& problem) {
  const AlsOptions& opt = problem.options();
  Sweep s(problem);
  AlignmentResult r;
  double current = s.loss();
  r.loss_trace.push_back(current);
  for (int it = 1; it <= opt.max_iter; ++it) {
    s.step();
    // the incremental mean drifts slowly, rebuild it every sweep
    s.z = mean_of(s.y, problem.counts());
    const double next = s.loss();
    if (!std::isfinite(next)) throw NonFinite("ALS loss became non-finite");
    r.loss_trace.push_back(next);
    r.iterations = it;
    const double change = std::abs(current - next);
    current = next;
    if (it >= opt.min_iter && change < opt.tol) {
      r.converged = true;
      break;
    }
  }
  r.motions = s.motions();
  r.mean = Configuration(s.z, problem.support());
  r.loss = current;
  r.counts = problem.counts();
  for (Index i = 0; i < problem.size(); ++i) r.symmetry_residuals.push_back(symmetry_residual(problem, r, i));
  return r;
}

AlignmentResult normalize_first_fixed(const AlignmentResult& result) {
  if (result.motions.empty()) throw InvalidArgument("alignment has no motions");
  AlignmentResult out = result;
  const RigidMotion h = result.motions.front().inverse();
  for (auto& g : out.motions) g = h.compose(g);
  out.motions.front() = RigidMotion::identity(h.dim());
  out.mean = h.apply(result.mean);
  return out;
}

double symmetry_residual(const GpaProblem& problem, const AlignmentResult& result, Index i) {
  if (i < 0 || i >= problem.size()) throw InvalidArgument("configuration index out of range");
  const Configuration& x = problem.config(i);
  const auto idx = x.indices();
  const MatrixXd y = result.motions[static_cast<std::size_t>(i)].apply(x.gather(idx));
  const MatrixXd z = result.mean.gather(idx);
  const MatrixXd yc = y.colwise() - y.rowwise().mean();
  const MatrixXd zc = z.colwise() - z.rowwise().mean();
  const MatrixXd m = zc * yc.transpose();
  return (m - m.transpose()).norm() / std::max(1.0, m.norm());
}

double loss_derivative(const GpaProblem& problem, const AlignmentResult& result,
                       std::span<const MatrixXd> directions) {
  check_directions(problem, directions);
  const double k = static_cast<double>(problem.size());
  MatrixXd velocity = MatrixXd::Zero(problem.dim(), problem.n_global());
  for (Index i = 0; i < problem.size(); ++i)
    velocity += directions[i] * result.motions[static_cast<std::size_t>(i)].apply(problem.config(i).matrix());
  return -2.0 / k * (result.mean.matrix().array() * velocity.array()).sum();
}

double hessian_form(const GpaProblem& problem, const AlignmentResult& result,
                    std::span<const MatrixXd> directions) {
  check_directions(problem, directions);
  const double k = static_cast<double>(problem.size());
  MatrixXd velocity = MatrixXd::Zero(problem.dim(), problem.n_global());
  MatrixXd accel = MatrixXd::Zero(problem.dim(), problem.n_global());
  for (Index i = 0; i < problem.size(); ++i) {
    const MatrixXd y = result.motions[static_cast<std::size_t>(i)].apply(problem.config(i).matrix());
    const MatrixXd ay = directions[i] * y;
    velocity += ay;
    accel += directions[i] * ay;
  }
  return -2.0 * (velocity.squaredNorm() / (k * k) + (result.mean.matrix().array() * accel.array()).sum() / k);
}

MatrixXd antisymmetric_basis_element(Index d, Index u, Index v) {
  if (u < 0 || v < 0 || u >= d || v >= d || u == v) throw InvalidArgument("bad antisymmetric basis index");
  MatrixXd e = MatrixXd::Zero(d, d);
  e(u, v) = 1;
  e(v, u) = -1;
  return e;
}

HessianSpectrum hessian_spectrum(const GpaProblem& problem, const AlignmentResult& result) {
  if (!problem.full_domain()) throw InvalidArgument("the Hessian needs full-domain configurations");
  const Index k = problem.size();
  const Index d = problem.dim();
  std::vector<std::pair<Index, Index>> pairs;
  for (Index u = 0; u < d; ++u)
    for (Index v = u + 1; v < d; ++v) pairs.emplace_back(u, v);
  const Index p = static_cast<Index>(pairs.size());
  const Index dim = (k - 1) * p;

  auto direction = [&](Index flat) {
    std::vector<MatrixXd> a(static_cast<std::size_t>(k), MatrixXd::Zero(d, d));
    if (flat >= 0) {
      const auto [u, v] = pairs[static_cast<std::size_t>(flat % p)];
      a[static_cast<std::size_t>(1 + flat / p)] = antisymmetric_basis_element(d, u, v);
    }
    return a;
  };

  HessianSpectrum out;
  out.matrix = MatrixXd::Zero(dim, dim);
  std::vector<double> diag(static_cast<std::size_t>(dim));
  for (Index r = 0; r < dim; ++r) diag[static_cast<std::size_t>(r)] = hessian_form(problem, result, direction(r));
  for (Index r = 0; r < dim; ++r) {
    out.matrix(r, r) = diag[static_cast<std::size_t>(r)];
    for (Index c = r + 1; c < dim; ++c) {
      auto a = direction(r);
      const auto b = direction(c);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      const double both = hessian_form(problem, result, a);
      out.matrix(r, c) = out.matrix(c, r) =
          0.5 * (both - diag[static_cast<std::size_t>(r)] - diag[static_cast<std::size_t>(c)]);
    }
  }
  if (dim > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(out.matrix, Eigen::EigenvaluesOnly);
    out.eigenvalues = es.eigenvalues();
    out.positive_definite = out.eigenvalues(0) > 0;
  }
  return out;
}

Index essential_dimension(const Configuration& x, double rel_tol) {
  if (!(rel_tol > 0) || rel_tol >= 1) throw InvalidArgument("rel_tol must lie in (0, 1)");
  const MatrixXd pts = x.compact();
  const MatrixXd c = pts.colwise() - pts.rowwise().mean();
  const VectorXd s = Eigen::JacobiSVD<MatrixXd>(c).singularValues();
  if (s.size() == 0 || s(0) <= std::numeric_limits<double>::min()) return 0;
  Index count = 0;
  for (Index r = 0; r < s.size(); ++r)
    if (s(r) >= rel_tol * s(0)) ++count;
  return count;
}

}  // namespace robust_coords

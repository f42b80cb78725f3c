#include "gibbsddrm/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gibbsddrm::oracle {

GaussianMoments exact_gaussian_posterior(const GaussianPrior& prior,
                                         const DenseOperator& op,
                                         const Vector& y, double sigma_y) {
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("exact_gaussian_posterior: sigma_y must be > 0");
  }
  const Matrix h = op.matrix();
  if (h.cols() != prior.dim() || h.rows() != y.size()) {
    throw std::invalid_argument("exact_gaussian_posterior: shape mismatch");
  }
  const double noise_prec = 1.0 / (sigma_y * sigma_y);
  const Matrix precision =
      Matrix::Identity(h.cols(), h.cols()) / prior.variance() +
      noise_prec * h.transpose() * h;
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "exact_gaussian_posterior: precision not positive definite (v="
        << prior.variance() << ", sigma_y=" << sigma_y
        << ", min diag=" << precision.diagonal().minCoeff() << ")";
    throw std::runtime_error(msg.str());
  }
  GaussianMoments out;
  out.covariance = llt.solve(Matrix::Identity(h.cols(), h.cols()));
  out.mean = llt.solve(prior.mean() / prior.variance() +
                       noise_prec * h.transpose() * y);
  if (!out.mean.allFinite() || !out.covariance.allFinite()) {
    throw std::runtime_error("exact_gaussian_posterior: non-finite result");
  }
  return out;
}

namespace {

// log sum_k w_k N(x; mu_k, v I), computed without the denoiser code path.
double gmm_log_density(const GmmPrior& prior, const Vector& x) {
  const double v = prior.variance();
  const double d = static_cast<double>(x.size());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<size_t>(prior.components()));
  for (Index k = 0; k < prior.components(); ++k) {
    const double w = prior.weights()(k);
    const double sq = (x - prior.means().row(k).transpose()).squaredNorm();
    terms[static_cast<size_t>(k)] =
        w > 0.0 ? std::log(w) - 0.5 * sq / v -
                      0.5 * d * std::log(2.0 * std::numbers::pi * v)
                : -std::numeric_limits<double>::infinity();
    best = std::max(best, terms[static_cast<size_t>(k)]);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

struct Node {
  Vector x;
  double log_w;
  double trap;  // trapezoid weight on the full grid
  bool coarse;  // lies on the every-other-node grid
  double trap_coarse;
};

double trapezoid(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

std::vector<Node> build_nodes(const std::vector<GridAxis>& grid) {
  std::vector<Node> nodes;
  const int d = static_cast<int>(grid.size());
  const int n0 = grid[0].points;
  const int n1 = d == 2 ? grid[1].points : 1;
  auto coord = [](const GridAxis& a, int i) {
    return a.lo + (a.hi - a.lo) * static_cast<double>(i) / (a.points - 1);
  };
  // The coarse grid keeps even nodes; its last node may not be the endpoint
  // for even point counts, which only makes the estimate more conservative.
  auto coarse_weight = [](int i, int n) {
    if (i % 2 != 0) return 0.0;
    const int last = (n - 1) - ((n - 1) % 2);
    return (i == 0 || i == last) ? 0.5 : 1.0;
  };
  nodes.reserve(static_cast<size_t>(n0) * static_cast<size_t>(n1));
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      Node node;
      node.x.resize(d);
      node.x(0) = coord(grid[0], i);
      if (d == 2) node.x(1) = coord(grid[1], j);
      node.trap = trapezoid(i, n0) * (d == 2 ? trapezoid(j, n1) : 1.0);
      node.trap_coarse =
          coarse_weight(i, n0) * (d == 2 ? coarse_weight(j, n1) : 1.0);
      node.coarse = node.trap_coarse > 0.0;
      node.log_w = 0.0;
      nodes.push_back(std::move(node));
    }
  }
  return nodes;
}

}  // namespace

QuadratureResult quadrature_posterior_mean(const GmmPrior& prior,
                                           const DenseOperator& op,
                                           const Vector& y, double sigma_y,
                                           const std::vector<GridAxis>& grid,
                                           double tolerance) {
  const Index d = prior.dim();
  if (d < 1 || d > 2) {
    throw std::invalid_argument("quadrature_posterior_mean: d_x must be 1 or 2");
  }
  if (static_cast<Index>(grid.size()) != d) {
    throw std::invalid_argument("quadrature_posterior_mean: one axis per dim");
  }
  for (const GridAxis& a : grid) {
    if (a.points < 3 || !(a.hi > a.lo)) {
      throw std::invalid_argument("quadrature_posterior_mean: bad grid axis");
    }
  }
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("quadrature_posterior_mean: sigma_y <= 0");
  }
  const Matrix h = op.matrix();
  if (h.cols() != d || h.rows() != y.size()) {
    throw std::invalid_argument("quadrature_posterior_mean: shape mismatch");
  }

  std::vector<Node> nodes = build_nodes(grid);
  double best = -std::numeric_limits<double>::infinity();
  for (Node& node : nodes) {
    node.log_w = gmm_log_density(prior, node.x) -
                 0.5 * (y - h * node.x).squaredNorm() / (sigma_y * sigma_y);
    best = std::max(best, node.log_w);
  }
  Vector num = Vector::Zero(d);
  Vector num_coarse = Vector::Zero(d);
  double den = 0.0;
  double den_coarse = 0.0;
  double edge_mass = 0.0;
  for (const Node& node : nodes) {
    const double w = std::exp(node.log_w - best);
    num += node.trap * w * node.x;
    den += node.trap * w;
    if (node.coarse) {
      num_coarse += node.trap_coarse * w * node.x;
      den_coarse += node.trap_coarse * w;
    }
    if (node.trap < 1.0) edge_mass = std::max(edge_mass, w);
  }
  QuadratureResult out;
  out.mean = num / den;
  out.error_estimate = (out.mean - num_coarse / den_coarse).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, out.mean.lpNorm<Eigen::Infinity>());
  if (out.error_estimate > tolerance * scale) {
    out.warning = true;
    out.message = "grid too coarse: estimated error " +
                  std::to_string(out.error_estimate);
  }
  if (edge_mass > tolerance) {
    out.warning = true;
    out.message += (out.message.empty() ? "" : "; ") +
                   std::string("grid truncates posterior mass at its edges");
  }
  return out;
}

std::vector<GridAxis> denoiser_grid(const GmmPrior& prior, const Vector& x,
                                    double sigma, int points) {
  const double pad = 14.0 * std::sqrt(prior.variance());
  std::vector<GridAxis> grid;
  for (Index i = 0; i < prior.dim(); ++i) {
    double lo = x(i);
    double hi = x(i);
    for (Index k = 0; k < prior.components(); ++k) {
      lo = std::min(lo, prior.means()(k, i));
      hi = std::max(hi, prior.means()(k, i));
    }
    grid.push_back({lo - pad, hi + pad, points});
  }
  (void)sigma;
  return grid;
}

QuadratureResult quadrature_denoise(const GmmPrior& prior, const Vector& x,
                                    double sigma, int points) {
  if (sigma == 0.0) return {x, 0.0, false, {}};
  const DenseOperator identity(Matrix::Identity(prior.dim(), prior.dim()));
  return quadrature_posterior_mean(prior, identity, x, sigma,
                                   denoiser_grid(prior, x, sigma, points));
}

Binning Binning::uniform(double lo, double hi, int bins) {
  Binning b;
  b.axes.push_back({lo, hi, bins});
  return b;
}

Binning Binning::covering(const Matrix& a, const Matrix& b, int bins) {
  if (a.cols() != b.cols() || a.rows() == 0 || b.rows() == 0) {
    throw std::invalid_argument("binning: empty or mismatched samples");
  }
  Binning out;
  for (Index c = 0; c < a.cols(); ++c) {
    const double lo = std::min(a.col(c).minCoeff(), b.col(c).minCoeff());
    double hi = std::max(a.col(c).maxCoeff(), b.col(c).maxCoeff());
    if (!(hi > lo)) hi = lo + 1.0;
    out.axes.push_back({lo, hi, bins});
  }
  return out;
}

namespace {

std::vector<double> histogram(const Matrix& s, const Binning& binning) {
  size_t cells = 1;
  for (const GridAxis& a : binning.axes) cells *= static_cast<size_t>(a.points);
  std::vector<double> h(cells, 0.0);
  for (Index r = 0; r < s.rows(); ++r) {
    size_t idx = 0;
    for (size_t c = 0; c < binning.axes.size(); ++c) {
      const GridAxis& a = binning.axes[c];
      const double u = (s(r, static_cast<Index>(c)) - a.lo) / (a.hi - a.lo);
      int bin = static_cast<int>(std::floor(u * a.points));
      bin = std::clamp(bin, 0, a.points - 1);
      idx = idx * static_cast<size_t>(a.points) + static_cast<size_t>(bin);
    }
    h[idx] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(s.rows());
  return h;
}

}  // namespace

double tv_distance(const Matrix& samples_a, const Matrix& samples_b,
                   const Binning& binning) {
  if (samples_a.rows() == 0 || samples_b.rows() == 0) {
    throw std::invalid_argument("tv_distance: empty sample set");
  }
  if (samples_a.cols() != samples_b.cols() ||
      samples_a.cols() != static_cast<Index>(binning.axes.size())) {
    throw std::invalid_argument("tv_distance: dimension mismatch");
  }
  for (const GridAxis& a : binning.axes) {
    if (a.points < 1 || !(a.hi > a.lo)) {
      throw std::invalid_argument("tv_distance: bad binning");
    }
  }
  const auto ha = histogram(samples_a, binning);
  const auto hb = histogram(samples_b, binning);
  double tv = 0.0;
  for (size_t i = 0; i < ha.size(); ++i) tv += std::abs(ha[i] - hb[i]);
  return std::min(1.0, 0.5 * tv);
}

double tv_distance(const Vector& samples_a, const Vector& samples_b,
                   const Binning& binning) {
  return tv_distance(Matrix(samples_a), Matrix(samples_b), binning);
}

Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw std::invalid_argument("sample_gaussian: shape mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean +
         eig.eigenvectors() * root.cwiseProduct(rng.normal_vector(mean.size()));
}

GaussianMoments condition_gaussian(const Vector& mean, const Matrix& cov,
                                   const std::vector<Index>& target,
                                   const std::vector<Index>& given,
                                   const Vector& values) {
  const Index nt = static_cast<Index>(target.size());
  const Index ng = static_cast<Index>(given.size());
  if (values.size() != ng) {
    throw std::invalid_argument("condition_gaussian: value count mismatch");
  }
  Vector mt(nt);
  Matrix ctt(nt, nt);
  for (Index i = 0; i < nt; ++i) {
    mt(i) = mean(target[i]);
    for (Index j = 0; j < nt; ++j) ctt(i, j) = cov(target[i], target[j]);
  }
  if (ng == 0) return {mt, ctt};
  Vector mg(ng);
  Matrix cgg(ng, ng);
  Matrix ctg(nt, ng);
  for (Index i = 0; i < ng; ++i) {
    mg(i) = mean(given[i]);
    for (Index j = 0; j < ng; ++j) cgg(i, j) = cov(given[i], given[j]);
    for (Index j = 0; j < nt; ++j) ctg(j, i) = cov(target[j], given[i]);
  }
  Eigen::LDLT<Matrix> ldlt(cgg);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("condition_gaussian: singular conditioning block");
  }
  GaussianMoments out;
  out.mean = mt + ctg * ldlt.solve(values - mg);
  out.covariance = ctt - ctg * ldlt.solve(ctg.transpose());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

void ToyModel::validate() const {
  const Index d = dim();
  if (d < 1 || d > 2) throw std::invalid_argument("toy: d_x must be 1 or 2");
  if (base_operator.cols() != d || measurement_dim() < 1 ||
      measurement_dim() > 2) {
    throw std::invalid_argument("toy: operator must be d_y x d_x, d_y <= 2");
  }
  if (y.size() != measurement_dim()) {
    throw std::invalid_argument("toy: y has wrong size");
  }
  if (steps() < 1 || steps() > 3) {
    throw std::invalid_argument("toy: schedule must have 1 <= T <= 3");
  }
  if (sigmas[0] != 0.0) throw std::invalid_argument("toy: sigma_0 must be 0");
  for (size_t t = 1; t < sigmas.size(); ++t) {
    if (!(sigmas[t] > sigmas[t - 1])) {
      throw std::invalid_argument("toy: sigmas must increase");
    }
  }
  if (!(prior_variance > 0.0) || !(sigma_y > 0.0) || !(phi_variance > 0.0)) {
    throw std::invalid_argument("toy: variances must be > 0");
  }
}

GaussianMoments ToyModel::joint(double phi) const {
  const Index d = dim();
  const Index dy = measurement_dim();
  const int top = steps();
  const Index n = measurement_offset() + dy;
  GaussianMoments out{Vector::Zero(n), Matrix::Zero(n, n)};
  const Matrix eye = Matrix::Identity(d, d);
  for (int s = 0; s <= top; ++s) {
    out.mean.segment(latent_offset(s), d) = prior_mean;
    for (int t = 0; t <= top; ++t) {
      const double sig = sigmas[static_cast<size_t>(std::min(s, t))];
      out.covariance.block(latent_offset(s), latent_offset(t), d, d) =
          (prior_variance + sig * sig) * eye;
    }
    const Matrix cross = phi * prior_variance * base_operator;
    out.covariance.block(measurement_offset(), latent_offset(s), dy, d) = cross;
    out.covariance.block(latent_offset(s), measurement_offset(), d, dy) =
        cross.transpose();
  }
  out.mean.segment(measurement_offset(), dy) = phi * base_operator * prior_mean;
  out.covariance.block(measurement_offset(), measurement_offset(), dy, dy) =
      phi * phi * prior_variance * base_operator * base_operator.transpose() +
      sigma_y * sigma_y * Matrix::Identity(dy, dy);
  return out;
}

GaussianMoments ToyModel::x0_posterior(double phi) const {
  validate();
  const GaussianMoments z = joint(phi);
  std::vector<Index> target;
  std::vector<Index> given;
  for (Index i = 0; i < dim(); ++i) target.push_back(i);
  for (Index i = 0; i < measurement_dim(); ++i) {
    given.push_back(measurement_offset() + i);
  }
  return condition_gaussian(z.mean, z.covariance, target, given, y);
}

double ToyModel::log_likelihood(double phi, const Vector& m,
                                double c) const {
  const Index dy = measurement_dim();
  const Vector am = base_operator * m;
  const double sy2 = sigma_y * sigma_y;
  const double g = phi * phi * c;
  if (dy == 1) {
    const double a2 = base_operator.row(0).squaredNorm();
    const double s = sy2 + g * a2;
    const double r = y(0) - phi * am(0);
    return -0.5 * (r * r / s + std::log(s));
  }
  const double s00 = sy2 + g * base_operator.row(0).squaredNorm();
  const double s11 = sy2 + g * base_operator.row(1).squaredNorm();
  const double s01 = g * base_operator.row(0).dot(base_operator.row(1));
  const double det = s00 * s11 - s01 * s01;
  const double r0 = y(0) - phi * am(0);
  const double r1 = y(1) - phi * am(1);
  return -0.5 *
         ((s11 * r0 * r0 - 2.0 * s01 * r0 * r1 + s00 * r1 * r1) / det +
          std::log(det));
}

std::pair<Vector, double> ToyModel::x0_given_latent(const Vector& x,
                                                    double sigma) const {
  const double v = prior_variance;
  const double s2 = sigma * sigma;
  return {prior_mean + (v / (v + s2)) * (x - prior_mean), v * s2 / (v + s2)};
}

double ToyModel::phi_grid_lo() const {
  return phi_mean - phi_grid_halfwidth * std::sqrt(phi_variance);
}

double ToyModel::phi_grid_hi() const {
  return phi_mean + phi_grid_halfwidth * std::sqrt(phi_variance);
}

double sample_on_grid(const std::function<double(double)>& log_density,
                      double lo, double hi, int points, Rng& rng) {
  if (points < 2 || !(hi > lo)) {
    throw std::invalid_argument("sample_on_grid: bad grid");
  }
  const double h = (hi - lo) / (points - 1);
  std::vector<double> w(static_cast<size_t>(points));
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    w[static_cast<size_t>(i)] = log_density(lo + h * i);
    best = std::max(best, w[static_cast<size_t>(i)]);
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("sample_on_grid: density vanishes on the grid");
  }
  for (double& v : w) v = std::exp(v - best);
  double total = 0.0;
  for (int i = 0; i + 1 < points; ++i) {
    total += 0.5 * (w[static_cast<size_t>(i)] + w[static_cast<size_t>(i) + 1]);
  }
  double u = rng.uniform() * total;
  int cell = 0;
  for (; cell + 2 < points; ++cell) {
    const double mass = 0.5 * (w[static_cast<size_t>(cell)] +
                               w[static_cast<size_t>(cell) + 1]);
    if (u < mass) break;
    u -= mass;
  }
  const double a = w[static_cast<size_t>(cell)];
  const double b = w[static_cast<size_t>(cell) + 1];
  // Invert a s + (b - a) s^2 / 2 = q on [0, 1].
  const double q = std::clamp(u, 0.0, 0.5 * (a + b));
  double s;
  if (std::abs(b - a) < 1e-12 * (a + b)) {
    s = q / (0.5 * (a + b));
  } else {
    s = (-a + std::sqrt(std::max(0.0, a * a + 2.0 * (b - a) * q))) / (b - a);
  }
  return lo + h * (cell + std::clamp(s, 0.0, 1.0));
}

Matrix sample_toy_posterior(const ToyModel& toy, int count, Rng& rng) {
  toy.validate();
  const Index d = toy.dim();
  Matrix out(count, d + 1);
  const double tau2 = toy.phi_variance;
  auto log_marginal = [&](double phi) {
    const double dp = phi - toy.phi_mean;
    return -0.5 * dp * dp / tau2 +
           toy.log_likelihood(phi, toy.prior_mean, toy.prior_variance);
  };
  for (int n = 0; n < count; ++n) {
    const double phi =
        toy.phi_known ? toy.phi_mean
                      : sample_on_grid(log_marginal, toy.phi_grid_lo(),
                                       toy.phi_grid_hi(), toy.phi_grid_points,
                                       rng);
    const GaussianMoments post = toy.x0_posterior(phi);
    out.row(n).head(d) = sample_gaussian(post.mean, post.covariance, rng);
    out(n, d) = phi;
  }
  return out;
}

Vector sample_gmm_posterior(const GmmPrior& prior, const Vector& x,
                            double sigma, Rng& rng) {
  const double v = prior.variance();
  const double s2 = sigma * sigma;
  std::vector<double> logr(static_cast<size_t>(prior.components()));
  double best = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < prior.components(); ++k) {
    const double w = prior.weights()(k);
    logr[static_cast<size_t>(k)] =
        w > 0.0 ? std::log(w) - 0.5 *
                                    (x - prior.means().row(k).transpose())
                                        .squaredNorm() /
                                    (v + s2)
                : -std::numeric_limits<double>::infinity();
    best = std::max(best, logr[static_cast<size_t>(k)]);
  }
  double total = 0.0;
  for (double& l : logr) total += (l = std::exp(l - best));
  double u = rng.uniform() * total;
  Index k = 0;
  for (; k + 1 < prior.components(); ++k) {
    u -= logr[static_cast<size_t>(k)];
    if (u < 0.0) break;
  }
  const Vector mu = prior.means().row(k).transpose();
  const Vector m = (s2 * mu + v * x) / (v + s2);
  const double c = v * s2 / (v + s2);
  return m + std::sqrt(c) * rng.normal_vector(x.size());
}

JensenGapEstimate estimate_jensen_gap(const GmmPrior& prior,
                                      const DenseOperator& op,
                                      const Vector& y, double sigma_y,
                                      const Vector& x_t, double sigma_t,
                                      const Vector& x_hat, int samples,
                                      Rng& rng) {
  if (samples < 1) throw std::invalid_argument("jensen gap: samples < 1");
  const Matrix h = op.matrix();
  const double dy = static_cast<double>(y.size());
  const double norm =
      std::pow(2.0 * std::numbers::pi * sigma_y * sigma_y, dy / 2.0);
  auto f = [&](const Vector& x) {
    return std::exp(-0.5 * (y - h * x).squaredNorm() / (sigma_y * sigma_y)) /
           norm;
  };
  double mean_f = 0.0;
  double m1 = 0.0;
  for (int j = 0; j < samples; ++j) {
    const Vector x0 = sample_gmm_posterior(prior, x_t, sigma_t, rng);
    mean_f += f(x0);
    m1 += (x0 - x_hat).norm();
  }
  mean_f /= samples;
  m1 /= samples;
  Eigen::JacobiSVD<Matrix> svd(h);
  return {std::abs(mean_f - f(x_hat)), m1, svd.singularValues()(0)};
}

}  // namespace gibbsddrm::oracle

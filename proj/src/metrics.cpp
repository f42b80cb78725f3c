#include "gibbsddrm/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gibbsddrm {

double mse(const Vector& ref, const Vector& est) {
  if (ref.size() != est.size() || ref.size() == 0) {
    throw std::invalid_argument("mse: dimension mismatch");
  }
  return (ref - est).squaredNorm() / static_cast<double>(ref.size());
}

double psnr(const Vector& ref, const Vector& est, double data_range) {
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range <= 0");
  const double e = mse(ref, est);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / e);
}

Vector roll(const Vector& v, Index height, Index width, Index dr, Index dc) {
  if (v.size() != height * width) {
    throw std::invalid_argument("roll: size does not match grid");
  }
  Vector out(v.size());
  for (Index r = 0; r < height; ++r) {
    const Index rr = ((r + dr) % height + height) % height;
    for (Index c = 0; c < width; ++c) {
      const Index cc = ((c + dc) % width + width) % width;
      out(rr * width + cc) = v(r * width + c);
    }
  }
  return out;
}

namespace {

AlignmentGeometry resolve(const AlignmentGeometry& g, Index params) {
  AlignmentGeometry out = g;
  if (out.width == 0) {
    out.height = 1;
    out.width = params;
    out.kernel_h = 1;
    out.kernel_w = params;
  }
  if (out.kernel_h * out.kernel_w != params || out.kernel_h > out.height ||
      out.kernel_w > out.width) {
    throw std::invalid_argument("align_kernel: kernel does not fit the grid");
  }
  return out;
}

Vector pad(const Vector& k, const AlignmentGeometry& g) {
  Vector out = Vector::Zero(g.height * g.width);
  for (Index r = 0; r < g.kernel_h; ++r) {
    for (Index c = 0; c < g.kernel_w; ++c) {
      out(r * g.width + c) = k(r * g.kernel_w + c);
    }
  }
  return out;
}

}  // namespace

KernelAlignment align_kernel(const Vector& phi_ref, const Vector& phi_est,
                             const AlignmentGeometry& geometry) {
  if (phi_ref.size() != phi_est.size() || phi_ref.size() == 0) {
    throw std::invalid_argument("align_kernel: dimension mismatch");
  }
  const double ref_norm = phi_ref.norm();
  if (!(ref_norm > 0.0)) throw std::invalid_argument("align_kernel: zero ref");
  const AlignmentGeometry g = resolve(geometry, phi_ref.size());
  const Vector ref = pad(phi_ref, g);
  const Vector est = pad(phi_est, g);
  KernelAlignment best{std::numeric_limits<double>::infinity(), 0, 0};
  for (Index dr = 0; dr < g.height; ++dr) {
    for (Index dc = 0; dc < g.width; ++dc) {
      const double err = (roll(est, g.height, g.width, dr, dc) - ref).norm();
      if (err < best.error) best = {err, dr, dc};
    }
  }
  best.error /= ref_norm;
  return best;
}

Metrics compute_metrics(const Vector& x_ref, const Vector& x_est,
                        const Vector& phi_ref, const Vector& phi_est,
                        double data_range, const AlignmentGeometry& geometry) {
  Metrics m;
  m.data_range = data_range;
  m.mse = mse(x_ref, x_est);
  const double p = psnr(x_ref, x_est, data_range);
  if (std::isfinite(p)) m.psnr_db = p;

  const KernelAlignment a = align_kernel(phi_ref, phi_est, geometry);
  m.kernel_error = a.error;
  m.shift_rows = a.shift_rows;
  m.shift_cols = a.shift_cols;

  const AlignmentGeometry g = resolve(geometry, phi_ref.size());
  Vector aligned = x_est;
  if (x_est.size() == g.height * g.width) {
    // The kernel moved by -shift relative to the truth, so the signal moved
    // by +shift; undo it.
    aligned = roll(x_est, g.height, g.width, -a.shift_rows, -a.shift_cols);
  }
  m.mse_aligned = mse(x_ref, aligned);
  const double pa = psnr(x_ref, aligned, data_range);
  if (std::isfinite(pa)) m.psnr_aligned_db = pa;
  return m;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["data_range"] = m.data_range;
  j["mse"] = m.mse;
  j["psnr_db"] = m.psnr_db ? nlohmann::json(*m.psnr_db) : nlohmann::json();
  j["psnr_infinite"] = !m.psnr_db.has_value();
  j["kernel_error_l2_normalized"] = m.kernel_error;
  j["kernel_shift"] = {m.shift_rows, m.shift_cols};
  j["mse_aligned"] = m.mse_aligned;
  j["psnr_aligned_db"] =
      m.psnr_aligned_db ? nlohmann::json(*m.psnr_aligned_db) : nlohmann::json();
  j["psnr_aligned_infinite"] = !m.psnr_aligned_db.has_value();
  return j;
}

}  // namespace gibbsddrm

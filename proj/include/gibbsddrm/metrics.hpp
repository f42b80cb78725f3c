#ifndef GIBBSDDRM_METRICS_HPP_
#define GIBBSDDRM_METRICS_HPP_

#include "gibbsddrm/types.hpp"

#include <json.hpp>

#include <optional>

namespace gibbsddrm {

// Grid on which kernels are compared. Kernels (kernel_h x kernel_w,
// row-major) are zero-padded to height x width and aligned by circular
// shifts of that grid. A zero width means "the kernel's own length" (1-D,
// pure circular shift of the parameter vector).
struct AlignmentGeometry {
  Index height = 1;
  Index width = 0;
  Index kernel_h = 1;
  Index kernel_w = 0;
};

struct Metrics {
  double data_range = 1.0;
  double mse = 0.0;
  // Empty when mse == 0 (PSNR is +inf).
  std::optional<double> psnr_db;
  double kernel_error = 0.0;  // ||phi_est - phi_ref|| / ||phi_ref||, aligned
  Index shift_rows = 0;
  Index shift_cols = 0;
  // Signal metrics after undoing the kernel shift (equal to the raw ones
  // when the signal does not live on the alignment grid).
  double mse_aligned = 0.0;
  std::optional<double> psnr_aligned_db;
};

double mse(const Vector& ref, const Vector& est);
// 10 log10(range^2 / mse); +inf when mse == 0.
double psnr(const Vector& ref, const Vector& est, double data_range);

struct KernelAlignment {
  double error = 0.0;
  Index shift_rows = 0;
  Index shift_cols = 0;
};

// Best circular alignment of phi_est onto phi_ref. Ties go to the first
// shift in row-major order.
KernelAlignment align_kernel(const Vector& phi_ref, const Vector& phi_est,
                             const AlignmentGeometry& geometry);

// Circular shift of a row-major height x width array.
Vector roll(const Vector& v, Index height, Index width, Index dr, Index dc);

Metrics compute_metrics(const Vector& x_ref, const Vector& x_est,
                        const Vector& phi_ref, const Vector& phi_est,
                        double data_range,
                        const AlignmentGeometry& geometry = {});

// PSNR fields become null with a companion *_infinite flag.
nlohmann::json metrics_to_json(const Metrics& m);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_METRICS_HPP_

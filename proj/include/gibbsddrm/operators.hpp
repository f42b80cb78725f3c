#ifndef GIBBSDDRM_OPERATORS_HPP_
#define GIBBSDDRM_OPERATORS_HPP_

#include "gibbsddrm/types.hpp"

#include <memory>

namespace gibbsddrm {

// Spectral coordinates whose gain falls below this fraction of the largest
// singular value are treated as exact zeros.
inline constexpr double kZeroGainRelTol = 1e-8;

// Materialized SVD H = U diag(s) V^H. Columns follow the operator's spectral
// coordinate order, not sorted order.
struct SvdFactors {
  CMatrix u;
  Vector s;
  CMatrix v;
};

// A linear operator H_phi : R^{d_x} -> R^{d_y} with parameters phi and an
// accessible SVD.
//
// Spectral data coordinates are xbar = V^H x, stored as complex numbers. For
// real operators diagonalized by the DFT the coordinates are conjugate
// symmetric; for dense operators the imaginary parts are zero. V is
// orthogonal in the real-linear sense, so to_spectral_data maps white real
// noise in data space to correctly scaled noise in spectral space.
class SpectralOperator {
 public:
  virtual ~SpectralOperator() = default;
  virtual std::unique_ptr<SpectralOperator> clone() const = 0;

  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  Index param_dim() const { return params().size(); }

  virtual const Vector& params() const = 0;
  // Replaces phi and recomputes the cached spectral data.
  virtual void set_params(const Vector& phi) = 0;

  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_adjoint(const Vector& y) const = 0;

  // Gain s_i of each spectral coordinate, aligned with to_spectral_data.
  virtual const Vector& spectral_gains() const = 0;
  // Singular values of the real-linear operator, sorted descending.
  virtual Vector singular_values() const = 0;

  virtual CVector to_spectral_data(const Vector& x) const = 0;
  virtual Vector from_spectral_data(const CVector& xbar) const = 0;
  // ybar = Sigma^+ U^H y, aligned with the data coordinates; zero wherever
  // the gain is treated as zero.
  virtual CVector to_spectral_measurement(const Vector& y) const = 0;

  // Gradient over phi of -(1 / (2 sigma_y^2)) ||y - H_phi x||^2.
  virtual Vector datafit_grad(const Vector& x, const Vector& y,
                              double sigma_y) const = 0;

  virtual SvdFactors svd_factors() const = 0;

  // Dense matrix of the real-linear map, built column by column.
  Matrix to_matrix() const;

  double largest_singular_value() const { return spectral_gains().maxCoeff(); }
  bool is_zero_gain(Index i) const;
};

// Reference operator: an explicit d_y x d_x matrix, phi = row-major entries.
class DenseOperator final : public SpectralOperator {
 public:
  explicit DenseOperator(Matrix matrix);

  std::unique_ptr<SpectralOperator> clone() const override;
  Index input_dim() const override { return matrix_.cols(); }
  Index output_dim() const override { return matrix_.rows(); }
  const Vector& params() const override { return phi_; }
  void set_params(const Vector& phi) override;

  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  const Vector& spectral_gains() const override { return gains_; }
  Vector singular_values() const override;
  CVector to_spectral_data(const Vector& x) const override;
  Vector from_spectral_data(const CVector& xbar) const override;
  CVector to_spectral_measurement(const Vector& y) const override;
  Vector datafit_grad(const Vector& x, const Vector& y,
                      double sigma_y) const override;
  SvdFactors svd_factors() const override;

  const Matrix& matrix() const { return matrix_; }

 private:
  void refresh();

  Matrix matrix_;
  Vector phi_;
  Matrix u_;
  Matrix v_;
  Vector s_;
  Vector gains_;
};

// Shared machinery of operators diagonalized by a unitary DFT: per-bin
// transfer function lambda, gains |lambda|.
class DftDiagonalOperator : public SpectralOperator {
 public:
  const Vector& params() const override { return phi_; }
  void set_params(const Vector& phi) override;

  const Vector& spectral_gains() const override { return gains_; }
  SvdFactors svd_factors() const override;
  const CVector& transfer() const { return transfer_; }

  // Largest size for which svd_factors materializes dense factors.
  static constexpr Index kMaxMaterializedDim = 64;

 protected:
  explicit DftDiagonalOperator(Vector phi) : phi_(std::move(phi)) {}

  // Unitary forward / inverse transforms over the bin grid.
  virtual CVector forward(const CVector& data) const = 0;
  virtual CVector inverse(const CVector& bins) const = 0;
  virtual CVector compute_transfer() const = 0;
  virtual void validate_params(const Vector& phi) const = 0;
  Index bins() const { return transfer_.size(); }
  void refresh();

  Vector phi_;
  CVector transfer_;
  Vector gains_;
};

// Circular convolution of a real length-n signal with a real kernel of
// support L <= n placed at taps 0..L-1. phi = kernel.
class CirculantConvolution1d final : public DftDiagonalOperator {
 public:
  CirculantConvolution1d(Index signal_length, Vector kernel);

  std::unique_ptr<SpectralOperator> clone() const override;
  Index input_dim() const override { return n_; }
  Index output_dim() const override { return n_; }
  Index support() const { return phi_.size(); }

  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Vector singular_values() const override;
  CVector to_spectral_data(const Vector& x) const override;
  Vector from_spectral_data(const CVector& xbar) const override;
  CVector to_spectral_measurement(const Vector& y) const override;
  Vector datafit_grad(const Vector& x, const Vector& y,
                      double sigma_y) const override;

 protected:
  CVector forward(const CVector& data) const override;
  CVector inverse(const CVector& bins) const override;
  CVector compute_transfer() const override;
  void validate_params(const Vector& phi) const override;

 private:
  Index n_;
};

// 2-D circular convolution of a row-major height x width image with a
// row-major kernel_h x kernel_w kernel anchored at (0, 0).
class CirculantConvolution2d final : public DftDiagonalOperator {
 public:
  CirculantConvolution2d(Index height, Index width, Index kernel_h,
                         Index kernel_w, Vector kernel);

  std::unique_ptr<SpectralOperator> clone() const override;
  Index input_dim() const override { return height_ * width_; }
  Index output_dim() const override { return height_ * width_; }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index kernel_h() const { return kernel_h_; }
  Index kernel_w() const { return kernel_w_; }

  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Vector singular_values() const override;
  CVector to_spectral_data(const Vector& x) const override;
  Vector from_spectral_data(const CVector& xbar) const override;
  CVector to_spectral_measurement(const Vector& y) const override;
  Vector datafit_grad(const Vector& x, const Vector& y,
                      double sigma_y) const override;

 protected:
  CVector forward(const CVector& data) const override;
  CVector inverse(const CVector& bins) const override;
  CVector compute_transfer() const override;
  void validate_params(const Vector& phi) const override;

 private:
  Index height_;
  Index width_;
  Index kernel_h_;
  Index kernel_w_;
};

// Complex-domain circular convolution y_n = sum_l conj(g_l) x_{n-l}, the
// per-frequency reverberation model. Complex vectors are stored interleaved
// as (re_0, im_0, re_1, im_1, ...) and the operator acts real-linearly on
// them; phi is the interleaved transfer function g.
class ComplexCirculantConvolution1d final : public DftDiagonalOperator {
 public:
  ComplexCirculantConvolution1d(Index signal_length, Vector kernel);

  std::unique_ptr<SpectralOperator> clone() const override;
  Index input_dim() const override { return 2 * n_; }
  Index output_dim() const override { return 2 * n_; }
  Index support() const { return phi_.size() / 2; }

  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Vector singular_values() const override;
  CVector to_spectral_data(const Vector& x) const override;
  Vector from_spectral_data(const CVector& xbar) const override;
  CVector to_spectral_measurement(const Vector& y) const override;
  Vector datafit_grad(const Vector& x, const Vector& y,
                      double sigma_y) const override;

 protected:
  CVector forward(const CVector& data) const override;
  CVector inverse(const CVector& bins) const override;
  CVector compute_transfer() const override;
  void validate_params(const Vector& phi) const override;

 private:
  Index n_;
};

// Unnormalized DFT helpers shared with tests and baselines.
CVector dft(const CVector& x);
CVector idft(const CVector& x);  // includes the 1/n factor
CVector dft2(const CVector& x, Index height, Index width);
CVector idft2(const CVector& x, Index height, Index width);

CVector interleaved_to_complex(const Vector& v);
Vector complex_to_interleaved(const CVector& z);

SvdFactors svd_factors(const SpectralOperator& op);

// Clip to nonnegative and renormalize to unit sum; uniform if nothing
// survives the clip.
Vector project_kernel_simplex(const Vector& kernel);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_OPERATORS_HPP_

#include "gibbsddrm/operators.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace gibbsddrm {
namespace {

void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(want) + ", got " +
                                std::to_string(got));
  }
}

void require_sigma(double sigma_y) {
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("datafit_grad: sigma_y must be > 0");
  }
}

Vector sorted_descending(Vector v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<double>());
  return v;
}

// Forces lambda(-k) = conj(lambda(k)) so paired bins share gains bit for bit.
void symmetrize_1d(CVector& lambda) {
  const Index n = lambda.size();
  lambda(0) = Complex(lambda(0).real(), 0.0);
  for (Index k = 1; k < n; ++k) {
    const Index partner = n - k;
    if (partner == k) {
      lambda(k) = Complex(lambda(k).real(), 0.0);
    } else if (partner > k) {
      lambda(partner) = std::conj(lambda(k));
    }
  }
}

void symmetrize_2d(CVector& lambda, Index h, Index w) {
  for (Index a = 0; a < h; ++a) {
    for (Index b = 0; b < w; ++b) {
      const Index self = a * w + b;
      const Index partner = ((h - a) % h) * w + (w - b) % w;
      if (partner == self) {
        lambda(self) = Complex(lambda(self).real(), 0.0);
      } else if (partner > self) {
        lambda(partner) = std::conj(lambda(self));
      }
    }
  }
}

CVector divide_nonzero(const SpectralOperator& op, const CVector& ybins,
                       const CVector& transfer) {
  CVector out = CVector::Zero(ybins.size());
  for (Index k = 0; k < ybins.size(); ++k) {
    if (!op.is_zero_gain(k)) out(k) = ybins(k) / transfer(k);
  }
  return out;
}

}  // namespace

namespace {

// kissfft reads out of bounds on length-1 input; that transform is the
// identity in both directions anyway.
void fft_line(Eigen::FFT<double>& fft, CVector& out, const CVector& in, bool inverse_dir) {
  if (in.size() <= 1) {
    out = in;
  } else if (inverse_dir) {
    fft.inv(out, in);
  } else {
    fft.fwd(out, in);
  }
}

}  // namespace

CVector dft(const CVector& x) {
  Eigen::FFT<double> fft;
  CVector out(x.size());
  fft_line(fft, out, x, false);
  return out;
}

CVector idft(const CVector& x) {
  Eigen::FFT<double> fft;
  CVector out(x.size());
  fft_line(fft, out, x, true);
  return out;
}

namespace {

CVector dft2_impl(const CVector& x, Index h, Index w, bool inverse_dir) {
  require_dim(x.size(), h * w, "dft2");
  Eigen::FFT<double> fft;
  CVector out = x;
  CVector line_in(w), line_out(w);
  for (Index r = 0; r < h; ++r) {
    line_in = out.segment(r * w, w);
    fft_line(fft, line_out, line_in, inverse_dir);
    out.segment(r * w, w) = line_out;
  }
  CVector col_in(h), col_out(h);
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h; ++r) col_in(r) = out(r * w + c);
    fft_line(fft, col_out, col_in, inverse_dir);
    for (Index r = 0; r < h; ++r) out(r * w + c) = col_out(r);
  }
  return out;
}

}  // namespace

CVector dft2(const CVector& x, Index height, Index width) {
  return dft2_impl(x, height, width, false);
}

CVector idft2(const CVector& x, Index height, Index width) {
  return dft2_impl(x, height, width, true);
}

CVector interleaved_to_complex(const Vector& v) {
  if (v.size() % 2 != 0) {
    throw std::invalid_argument("interleaved vector must have even length");
  }
  CVector z(v.size() / 2);
  for (Index i = 0; i < z.size(); ++i) z(i) = Complex(v(2 * i), v(2 * i + 1));
  return z;
}

Vector complex_to_interleaved(const CVector& z) {
  Vector v(2 * z.size());
  for (Index i = 0; i < z.size(); ++i) {
    v(2 * i) = z(i).real();
    v(2 * i + 1) = z(i).imag();
  }
  return v;
}

Matrix SpectralOperator::to_matrix() const {
  Matrix m(output_dim(), input_dim());
  Vector e = Vector::Zero(input_dim());
  for (Index j = 0; j < input_dim(); ++j) {
    e(j) = 1.0;
    m.col(j) = apply(e);
    e(j) = 0.0;
  }
  return m;
}

bool SpectralOperator::is_zero_gain(Index i) const {
  const Vector& g = spectral_gains();
  const double s1 = g.maxCoeff();
  return !(g(i) > 0.0) || g(i) < kZeroGainRelTol * s1;
}

SvdFactors svd_factors(const SpectralOperator& op) { return op.svd_factors(); }

Vector project_kernel_simplex(const Vector& kernel) {
  if (kernel.size() == 0) {
    throw std::invalid_argument("project_kernel_simplex: empty kernel");
  }
  Vector clipped = kernel.cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    return Vector::Constant(kernel.size(), 1.0 / static_cast<double>(kernel.size()));
  }
  return clipped / total;
}

// ---------------------------------------------------------------- dense

DenseOperator::DenseOperator(Matrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.size() == 0) throw std::invalid_argument("DenseOperator: empty");
  phi_.resize(matrix_.size());
  for (Index i = 0; i < matrix_.rows(); ++i) {
    for (Index j = 0; j < matrix_.cols(); ++j) {
      phi_(i * matrix_.cols() + j) = matrix_(i, j);
    }
  }
  refresh();
}

std::unique_ptr<SpectralOperator> DenseOperator::clone() const {
  return std::make_unique<DenseOperator>(*this);
}

void DenseOperator::set_params(const Vector& phi) {
  require_dim(phi.size(), matrix_.size(), "DenseOperator::set_params");
  phi_ = phi;
  for (Index i = 0; i < matrix_.rows(); ++i) {
    for (Index j = 0; j < matrix_.cols(); ++j) {
      matrix_(i, j) = phi_(i * matrix_.cols() + j);
    }
  }
  refresh();
}

void DenseOperator::refresh() {
  Eigen::JacobiSVD<Matrix> svd(matrix_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  s_ = svd.singularValues();
  gains_ = Vector::Zero(matrix_.cols());
  gains_.head(s_.size()) = s_;
}

Vector DenseOperator::apply(const Vector& x) const {
  require_dim(x.size(), input_dim(), "DenseOperator::apply");
  return matrix_ * x;
}

Vector DenseOperator::apply_adjoint(const Vector& y) const {
  require_dim(y.size(), output_dim(), "DenseOperator::apply_adjoint");
  return matrix_.transpose() * y;
}

Vector DenseOperator::singular_values() const { return s_; }

CVector DenseOperator::to_spectral_data(const Vector& x) const {
  require_dim(x.size(), input_dim(), "DenseOperator::to_spectral_data");
  return (v_.transpose() * x).cast<Complex>();
}

Vector DenseOperator::from_spectral_data(const CVector& xbar) const {
  require_dim(xbar.size(), input_dim(), "DenseOperator::from_spectral_data");
  return v_ * xbar.real();
}

CVector DenseOperator::to_spectral_measurement(const Vector& y) const {
  require_dim(y.size(), output_dim(), "DenseOperator::to_spectral_measurement");
  const Vector uty = u_.transpose() * y;
  CVector out = CVector::Zero(input_dim());
  for (Index i = 0; i < s_.size(); ++i) {
    if (!is_zero_gain(i)) out(i) = uty(i) / s_(i);
  }
  return out;
}

Vector DenseOperator::datafit_grad(const Vector& x, const Vector& y,
                                   double sigma_y) const {
  require_sigma(sigma_y);
  require_dim(y.size(), output_dim(), "DenseOperator::datafit_grad");
  const Vector r = y - apply(x);
  Vector g(phi_.size());
  const double scale = 1.0 / (sigma_y * sigma_y);
  for (Index i = 0; i < matrix_.rows(); ++i) {
    for (Index j = 0; j < matrix_.cols(); ++j) {
      g(i * matrix_.cols() + j) = scale * r(i) * x(j);
    }
  }
  return g;
}

SvdFactors DenseOperator::svd_factors() const {
  return SvdFactors{u_.cast<Complex>(), s_, v_.cast<Complex>()};
}

// -------------------------------------------------------- DFT diagonal

void DftDiagonalOperator::set_params(const Vector& phi) {
  validate_params(phi);
  phi_ = phi;
  refresh();
}

void DftDiagonalOperator::refresh() {
  transfer_ = compute_transfer();
  gains_ = transfer_.cwiseAbs();
}

SvdFactors DftDiagonalOperator::svd_factors() const {
  const Index n = bins();
  if (n > kMaxMaterializedDim) {
    throw std::length_error(
        "svd_factors: refusing to materialize DFT factors above 64 bins");
  }
  SvdFactors f{CMatrix(n, n), gains_, CMatrix(n, n)};
  CVector e = CVector::Zero(n);
  for (Index k = 0; k < n; ++k) {
    e(k) = 1.0;
    const CVector col = inverse(e);
    e(k) = 0.0;
    const Complex phase =
        gains_(k) > 0.0 ? transfer_(k) / gains_(k) : Complex(1.0, 0.0);
    f.v.col(k) = col;
    f.u.col(k) = col * phase;
  }
  return f;
}

// ------------------------------------------------------------ 1-D real

CirculantConvolution1d::CirculantConvolution1d(Index signal_length,
                                               Vector kernel)
    : DftDiagonalOperator(std::move(kernel)), n_(signal_length) {
  validate_params(phi_);
  refresh();
}

void CirculantConvolution1d::validate_params(const Vector& phi) const {
  if (phi.size() < 1 || phi.size() > n_) {
    throw std::invalid_argument(
        "CirculantConvolution1d: kernel support must be in [1, n]");
  }
}

std::unique_ptr<SpectralOperator> CirculantConvolution1d::clone() const {
  return std::make_unique<CirculantConvolution1d>(*this);
}

CVector CirculantConvolution1d::forward(const CVector& data) const {
  return dft(data) / std::sqrt(static_cast<double>(n_));
}

CVector CirculantConvolution1d::inverse(const CVector& bins) const {
  return idft(bins) * std::sqrt(static_cast<double>(n_));
}

CVector CirculantConvolution1d::compute_transfer() const {
  CVector padded = CVector::Zero(n_);
  padded.head(phi_.size()) = phi_.cast<Complex>();
  CVector lambda = dft(padded);
  symmetrize_1d(lambda);
  return lambda;
}

Vector CirculantConvolution1d::apply(const Vector& x) const {
  require_dim(x.size(), n_, "CirculantConvolution1d::apply");
  const CVector bins = dft(x.cast<Complex>());
  return idft(transfer_.cwiseProduct(bins)).real();
}

Vector CirculantConvolution1d::apply_adjoint(const Vector& y) const {
  require_dim(y.size(), n_, "CirculantConvolution1d::apply_adjoint");
  const CVector bins = dft(y.cast<Complex>());
  return idft(transfer_.conjugate().cwiseProduct(bins)).real();
}

Vector CirculantConvolution1d::singular_values() const {
  return sorted_descending(gains_);
}

CVector CirculantConvolution1d::to_spectral_data(const Vector& x) const {
  require_dim(x.size(), n_, "CirculantConvolution1d::to_spectral_data");
  return forward(x.cast<Complex>());
}

Vector CirculantConvolution1d::from_spectral_data(const CVector& xbar) const {
  require_dim(xbar.size(), n_, "CirculantConvolution1d::from_spectral_data");
  return inverse(xbar).real();
}

CVector CirculantConvolution1d::to_spectral_measurement(const Vector& y) const {
  require_dim(y.size(), n_, "CirculantConvolution1d::to_spectral_measurement");
  return divide_nonzero(*this, forward(y.cast<Complex>()), transfer_);
}

Vector CirculantConvolution1d::datafit_grad(const Vector& x, const Vector& y,
                                            double sigma_y) const {
  require_sigma(sigma_y);
  require_dim(y.size(), n_, "CirculantConvolution1d::datafit_grad");
  const Vector r = y - apply(x);
  const Index support = phi_.size();
  Vector g = Vector::Zero(support);
  // Cross-correlation of the residual with x, restricted to the support.
  for (Index l = 0; l < support; ++l) {
    double acc = 0.0;
    for (Index i = 0; i < n_; ++i) acc += r(i) * x((i - l + n_) % n_);
    g(l) = acc;
  }
  return g / (sigma_y * sigma_y);
}

// ------------------------------------------------------------------ 2-D

CirculantConvolution2d::CirculantConvolution2d(Index height, Index width,
                                               Index kernel_h, Index kernel_w,
                                               Vector kernel)
    : DftDiagonalOperator(std::move(kernel)),
      height_(height),
      width_(width),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w) {
  if (height_ < 1 || width_ < 1) {
    throw std::invalid_argument("CirculantConvolution2d: empty image");
  }
  if (kernel_h_ < 1 || kernel_w_ < 1 || kernel_h_ > height_ ||
      kernel_w_ > width_) {
    throw std::invalid_argument(
        "CirculantConvolution2d: kernel must fit inside the image");
  }
  validate_params(phi_);
  refresh();
}

void CirculantConvolution2d::validate_params(const Vector& phi) const {
  require_dim(phi.size(), kernel_h_ * kernel_w_, "CirculantConvolution2d kernel");
}

std::unique_ptr<SpectralOperator> CirculantConvolution2d::clone() const {
  return std::make_unique<CirculantConvolution2d>(*this);
}

CVector CirculantConvolution2d::forward(const CVector& data) const {
  return dft2(data, height_, width_) /
         std::sqrt(static_cast<double>(height_ * width_));
}

CVector CirculantConvolution2d::inverse(const CVector& bins) const {
  return idft2(bins, height_, width_) *
         std::sqrt(static_cast<double>(height_ * width_));
}

CVector CirculantConvolution2d::compute_transfer() const {
  CVector padded = CVector::Zero(height_ * width_);
  for (Index a = 0; a < kernel_h_; ++a) {
    for (Index b = 0; b < kernel_w_; ++b) {
      padded(a * width_ + b) = phi_(a * kernel_w_ + b);
    }
  }
  CVector lambda = dft2(padded, height_, width_);
  symmetrize_2d(lambda, height_, width_);
  return lambda;
}

Vector CirculantConvolution2d::apply(const Vector& x) const {
  require_dim(x.size(), input_dim(), "CirculantConvolution2d::apply");
  const CVector bins = dft2(x.cast<Complex>(), height_, width_);
  return idft2(transfer_.cwiseProduct(bins), height_, width_).real();
}

Vector CirculantConvolution2d::apply_adjoint(const Vector& y) const {
  require_dim(y.size(), output_dim(), "CirculantConvolution2d::apply_adjoint");
  const CVector bins = dft2(y.cast<Complex>(), height_, width_);
  return idft2(transfer_.conjugate().cwiseProduct(bins), height_, width_)
      .real();
}

Vector CirculantConvolution2d::singular_values() const {
  return sorted_descending(gains_);
}

CVector CirculantConvolution2d::to_spectral_data(const Vector& x) const {
  require_dim(x.size(), input_dim(), "CirculantConvolution2d::to_spectral_data");
  return forward(x.cast<Complex>());
}

Vector CirculantConvolution2d::from_spectral_data(const CVector& xbar) const {
  require_dim(xbar.size(), input_dim(),
              "CirculantConvolution2d::from_spectral_data");
  return inverse(xbar).real();
}

CVector CirculantConvolution2d::to_spectral_measurement(const Vector& y) const {
  require_dim(y.size(), output_dim(),
              "CirculantConvolution2d::to_spectral_measurement");
  return divide_nonzero(*this, forward(y.cast<Complex>()), transfer_);
}

Vector CirculantConvolution2d::datafit_grad(const Vector& x, const Vector& y,
                                            double sigma_y) const {
  require_sigma(sigma_y);
  require_dim(y.size(), output_dim(), "CirculantConvolution2d::datafit_grad");
  const Vector r = y - apply(x);
  Vector g = Vector::Zero(phi_.size());
  for (Index a = 0; a < kernel_h_; ++a) {
    for (Index b = 0; b < kernel_w_; ++b) {
      double acc = 0.0;
      for (Index i = 0; i < height_; ++i) {
        const Index si = (i - a + height_) % height_;
        for (Index j = 0; j < width_; ++j) {
          acc += r(i * width_ + j) * x(si * width_ + (j - b + width_) % width_);
        }
      }
      g(a * kernel_w_ + b) = acc;
    }
  }
  return g / (sigma_y * sigma_y);
}

// -------------------------------------------------------- complex 1-D

ComplexCirculantConvolution1d::ComplexCirculantConvolution1d(
    Index signal_length, Vector kernel)
    : DftDiagonalOperator(std::move(kernel)), n_(signal_length) {
  validate_params(phi_);
  refresh();
}

void ComplexCirculantConvolution1d::validate_params(const Vector& phi) const {
  if (phi.size() % 2 != 0 || phi.size() < 2 || phi.size() / 2 > n_) {
    throw std::invalid_argument(
        "ComplexCirculantConvolution1d: kernel must be interleaved complex "
        "with support in [1, n]");
  }
}

std::unique_ptr<SpectralOperator> ComplexCirculantConvolution1d::clone() const {
  return std::make_unique<ComplexCirculantConvolution1d>(*this);
}

CVector ComplexCirculantConvolution1d::forward(const CVector& data) const {
  return dft(data) / std::sqrt(static_cast<double>(n_));
}

CVector ComplexCirculantConvolution1d::inverse(const CVector& bins) const {
  return idft(bins) * std::sqrt(static_cast<double>(n_));
}

CVector ComplexCirculantConvolution1d::compute_transfer() const {
  CVector padded = CVector::Zero(n_);
  padded.head(support()) = interleaved_to_complex(phi_).conjugate();
  return dft(padded);
}

Vector ComplexCirculantConvolution1d::apply(const Vector& x) const {
  require_dim(x.size(), input_dim(), "ComplexCirculantConvolution1d::apply");
  const CVector bins = dft(interleaved_to_complex(x));
  return complex_to_interleaved(idft(transfer_.cwiseProduct(bins)));
}

Vector ComplexCirculantConvolution1d::apply_adjoint(const Vector& y) const {
  require_dim(y.size(), output_dim(),
              "ComplexCirculantConvolution1d::apply_adjoint");
  const CVector bins = dft(interleaved_to_complex(y));
  return complex_to_interleaved(
      idft(transfer_.conjugate().cwiseProduct(bins)));
}

Vector ComplexCirculantConvolution1d::singular_values() const {
  Vector doubled(2 * n_);
  for (Index k = 0; k < n_; ++k) doubled(2 * k) = doubled(2 * k + 1) = gains_(k);
  return sorted_descending(doubled);
}

CVector ComplexCirculantConvolution1d::to_spectral_data(const Vector& x) const {
  require_dim(x.size(), input_dim(),
              "ComplexCirculantConvolution1d::to_spectral_data");
  return forward(interleaved_to_complex(x));
}

Vector ComplexCirculantConvolution1d::from_spectral_data(
    const CVector& xbar) const {
  require_dim(xbar.size(), n_,
              "ComplexCirculantConvolution1d::from_spectral_data");
  return complex_to_interleaved(inverse(xbar));
}

CVector ComplexCirculantConvolution1d::to_spectral_measurement(
    const Vector& y) const {
  require_dim(y.size(), output_dim(),
              "ComplexCirculantConvolution1d::to_spectral_measurement");
  return divide_nonzero(*this, forward(interleaved_to_complex(y)), transfer_);
}

Vector ComplexCirculantConvolution1d::datafit_grad(const Vector& x,
                                                   const Vector& y,
                                                   double sigma_y) const {
  require_sigma(sigma_y);
  require_dim(y.size(), output_dim(),
              "ComplexCirculantConvolution1d::datafit_grad");
  const CVector z = interleaved_to_complex(x);
  const CVector r = interleaved_to_complex(y - apply(x));
  Vector g(phi_.size());
  for (Index l = 0; l < support(); ++l) {
    Complex c(0.0, 0.0);
    for (Index i = 0; i < n_; ++i) c += std::conj(r(i)) * z((i - l + n_) % n_);
    g(2 * l) = c.real();
    g(2 * l + 1) = c.imag();
  }
  return g / (sigma_y * sigma_y);
}

}  // namespace gibbsddrm

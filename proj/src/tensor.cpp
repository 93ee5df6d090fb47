#include "muonad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "muonad/error.hpp"

namespace muonad {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto s : shape_) {
    require(s > 0, [&] { return "tensor dimensions must be positive, got " + shape_str(shape_); });
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto s : shape_) {
    require(s > 0, [&] { return "tensor dimensions must be positive, got " + shape_str(shape_); });
  }
  require(shape_numel(shape_) == data_.size(),
          [&] { return "shape " + shape_str(shape_) + " does not match data length " + std::to_string(data_.size()); });
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    t(i, i) = 1.0;
  }
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() > 0, "empty input");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    require(r.size() == cols, "ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  require(rank() == 2, [&] { return "expected rank-2 tensor, got " + shape_str(shape_); });
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require(rank() == 2, [&] { return "expected rank-2 tensor, got " + shape_str(shape_); });
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(),
          [&] { return std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()); });
}

void check_nonempty(const Tensor& t) { require(!t.empty(), "empty input"); }

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += b[i];
  }
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] -= b[i];
  }
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.values()) {
    v *= s;
  }
  return out;
}

Tensor operator*(const Tensor& a, double s) { return s * a; }

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] *= b[i];
  }
  return out;
}

Tensor& axpy(double alpha, const Tensor& x, Tensor& y) {
  check_same(x, y, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += alpha * x[i];
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(),
          [&] { return "matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()); });
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) += av * b(p, j);
      }
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(),
          [&] { return "matmul_nt: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T"; });
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += a(i, p) * b(j, p);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(),
          [&] { return "matmul_tn: inner dimensions differ " + shape_str(a.shape()) + "^T x " + shape_str(b.shape()); });
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a(p, i);
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) += av * b(p, j);
      }
    }
  }
  return out;
}

Tensor transpose(const Tensor& m) {
  Tensor out({m.cols(), m.rows()});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(j, i) = m(i, j);
    }
  }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), [&] { return "dot: length mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()); });
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double sum(const Tensor& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); }

double mean(const Tensor& t) {
  check_nonempty(t);
  return sum(t) / static_cast<double>(t.size());
}

double l2_norm(const Tensor& t) { return std::sqrt(dot(t, t)); }

double rms(const Tensor& t) {
  check_nonempty(t);
  return std::sqrt(dot(t, t) / static_cast<double>(t.size()));
}

double frobenius_norm(const Tensor& m) {
  check_nonempty(m);
  require(m.rank() == 2, "frobenius_norm expects a rank-2 tensor");
  return l2_norm(m);
}

Tensor softmax_rows(const Tensor& m) {
  check_nonempty(m);
  require(m.rank() == 2, "softmax_rows expects a rank-2 tensor");
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mx = m(i, 0);
    for (std::size_t j = 1; j < m.cols(); ++j) {
      mx = std::max(mx, m(i, j));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(i, j) = std::exp(m(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(i, j) /= z;
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace muonad

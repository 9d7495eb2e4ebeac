#include "vgm2p/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace vgm2p {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("tensor: shape " + shape_str() + " does not match " + std::to_string(data.size()) +
                             " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.data.assign(shape_numel(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::filled(std::vector<std::size_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::row(std::initializer_list<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data.assign(values);
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    if (values.size() != rows * cols) throw DimensionError("tensor: matrix initializer size mismatch");
    Tensor t;
    t.shape = {rows, cols};
    t.data.assign(values);
    return t;
}

std::size_t Tensor::rows() const {
    if (shape.empty()) throw DimensionError("tensor: rows() on rank-0 tensor");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() == 1) return shape[0];
    if (rank() == 2) return shape[1];
    throw DimensionError("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << "]";
    return out.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
        throw DimensionError("matmul: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = &a.data[i * k];
        double* ci = &c.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = &b.data[p * n];
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
        throw DimensionError("matmul_at_b: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = &a.data[p * m];
        const double* bp = &b.data[p * n];
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = &c.data[i * n];
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1])
        throw DimensionError("matmul_a_bt: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = &a.data[i * k];
        double* ci = &c.data[i * n];
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = &b.data[j * k];
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
    return c;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || x.shape[1] != bias.shape[0])
        throw DimensionError("add_bias: " + x.shape_str() + " + " + bias.shape_str());
    Tensor y = x;
    const std::size_t n = bias.shape[0];
    for (std::size_t i = 0; i < x.shape[0]; ++i)
        for (std::size_t j = 0; j < n; ++j) y.data[i * n + j] += bias.data[j];
    return y;
}

namespace {
void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same(a, b, "hadamard");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (double& v : c.data) v *= s;
    return c;
}

Tensor col_sums(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("col_sums: expected rank-2, got " + x.shape_str());
    Tensor s = Tensor::zeros({x.shape[1]});
    for (std::size_t i = 0; i < x.shape[0]; ++i)
        for (std::size_t j = 0; j < x.shape[1]; ++j) s.data[j] += x.at(i, j);
    return s;
}

double sum_squares(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data) acc += v * v;
    return acc;
}

double dot(const Tensor& a, const Tensor& b) {
    check_same(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

double l2_norm(const Tensor& a) {
    return std::sqrt(sum_squares(a));
}

void ensure_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw NumericError(what + ": non-finite value", v);
}

DualTensor::DualTensor(Tensor p, Tensor t) : primal(std::move(p)), tangent(std::move(t)) {
    if (!primal.same_shape(tangent))
        throw DimensionError("dual tensor: primal " + primal.shape_str() + " vs tangent " + tangent.shape_str());
}

}  // namespace vgm2p

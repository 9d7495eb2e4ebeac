#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vgm2p {

// Shapes that do not line up (bad layer width, mismatched operands).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computation produced a non-finite value; carries the offending value.
struct NumericError : std::runtime_error {
    double value;
    NumericError(const std::string& what, double v) : std::runtime_error(what), value(v) {}
};

// Requested condition has zero probability mass under the behavior policy.
struct DegenerateConditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major tensor of 64-bit floats. Rank 1 or 2 throughout this
// project; shape is kept generic so checkpoints stay self-describing.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor filled(std::vector<std::size_t> shape, double value);
    static Tensor row(std::initializer_list<double> values);            // [n]
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

// Elementwise and linear-algebra helpers. All check shapes and throw
// DimensionError on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);        // [m,k]x[k,n] -> [m,n]
Tensor matmul_at_b(const Tensor& a, const Tensor& b);   // a^T b: [k,m]x[k,n] -> [m,n]
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);   // a b^T: [m,k]x[n,k] -> [m,n]
Tensor add_bias(const Tensor& x, const Tensor& bias);   // [B,n] + [n] rowwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor col_sums(const Tensor& x);                       // [B,n] -> [n]
double sum_squares(const Tensor& x);
double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

// Throws NumericError naming `what` if any entry is non-finite.
void ensure_finite(const Tensor& t, const std::string& what);

// Forward-mode pair: value plus directional derivative of the same shape.
struct DualTensor {
    Tensor primal;
    Tensor tangent;

    DualTensor() = default;
    DualTensor(Tensor p, Tensor t);
};

}  // namespace vgm2p

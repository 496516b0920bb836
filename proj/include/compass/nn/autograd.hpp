#pragma once

// Minimal reverse-mode autodiff over dense row-major matrices, sized for
// the tiny encoder-decoder used in desk-scale training runs.

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace compass::nn {

using Scalar = float;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
    Mat value;
    Mat grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;

    void accumulate(const Mat& g);
    void zero_grad() { grad.resize(0, 0); }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Mat& value() const { return node_->value; }
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

Var parameter(Mat init);
Var constant(Mat value);

// Runs backpropagation from a 1x1 loss.
void backward(const Var& loss);

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
// Adds a 1 x cols row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, Scalar s);
Var gelu(const Var& a);
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, Scalar eps = 1e-5f);
// Row softmax of (a + mask); mask is an additive constant, may be null.
Var softmax_rows(const Var& a, const Mat* mask = nullptr);
Var embedding(const Var& table, const std::vector<int>& ids);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
// Mean negative log-likelihood over rows whose target != ignore_index.
Var cross_entropy(const Var& logits, const std::vector<int>& targets, int ignore_index = -1);

Mat log_softmax_rows(const Mat& logits);

}  // namespace compass::nn

#include "compass/nn/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace compass::nn {

namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(std::initializer_list<const Var*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Var* v : inputs) {
        if (v->requires_grad()) return true;
    }
    return false;
}

// Creates the output node; backward is attached only when gradients flow.
std::shared_ptr<Node> make_output(Mat value, std::initializer_list<const Var*> inputs) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = any_requires_grad(inputs);
    if (node->requires_grad) {
        for (const Var* v : inputs) node->parents.push_back(v->shared());
    }
    return node;
}

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void Node::accumulate(const Mat& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var parameter(Mat init) {
    auto node = std::make_shared<Node>();
    node->value = std::move(init);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var constant(Mat value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& loss) {
    check(loss.rows() == 1 && loss.cols() == 1, "backward expects a 1x1 loss");
    if (!loss.requires_grad()) return;
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->accumulate(Mat::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && node->grad.size() != 0) node->backward();
    }
}

Var matmul(const Var& a, const Var& b) {
    check(a.cols() == b.rows(), "matmul shape mismatch");
    auto out = make_output(a.value() * b.value(), {&a, &b});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        Node* pb = b.node();
        out->backward = [self, pa, pb] {
            if (pa->requires_grad) pa->accumulate(self->grad * pb->value.transpose());
            if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self->grad);
        };
    }
    return Var(std::move(out));
}

Var matmul_nt(const Var& a, const Var& b) {
    check(a.cols() == b.cols(), "matmul_nt shape mismatch");
    auto out = make_output(a.value() * b.value().transpose(), {&a, &b});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        Node* pb = b.node();
        out->backward = [self, pa, pb] {
            if (pa->requires_grad) pa->accumulate(self->grad * pb->value);
            if (pb->requires_grad) pb->accumulate(self->grad.transpose() * pa->value);
        };
    }
    return Var(std::move(out));
}

Var add(const Var& a, const Var& b) {
    check(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
    auto out = make_output(a.value() + b.value(), {&a, &b});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        Node* pb = b.node();
        out->backward = [self, pa, pb] {
            if (pa->requires_grad) pa->accumulate(self->grad);
            if (pb->requires_grad) pb->accumulate(self->grad);
        };
    }
    return Var(std::move(out));
}

Var add_row(const Var& a, const Var& row) {
    check(row.rows() == 1 && row.cols() == a.cols(), "add_row shape mismatch");
    Mat value = a.value();
    value.rowwise() += row.value().row(0);
    auto out = make_output(std::move(value), {&a, &row});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        Node* pr = row.node();
        out->backward = [self, pa, pr] {
            if (pa->requires_grad) pa->accumulate(self->grad);
            if (pr->requires_grad) pr->accumulate(self->grad.colwise().sum());
        };
    }
    return Var(std::move(out));
}

Var scale(const Var& a, Scalar s) {
    auto out = make_output(a.value() * s, {&a});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        out->backward = [self, pa, s] { pa->accumulate(self->grad * s); };
    }
    return Var(std::move(out));
}

constexpr Scalar kGeluK = 0.7978845608028654f;  // sqrt(2/pi)
constexpr Scalar kGeluC = 0.044715f;

Var gelu(const Var& a) {
    constexpr Scalar k = kGeluK;
    constexpr Scalar c = kGeluC;
    const Mat& x = a.value();
    Mat t = (k * (x.array() + c * x.array().cube())).tanh().matrix();
    Mat value = (0.5f * x.array() * (1.0f + t.array())).matrix();
    auto out = make_output(std::move(value), {&a});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        out->backward = [self, pa, t = std::move(t)] {
            const auto& x = pa->value.array();
            auto dt = (1.0f - t.array().square()) * kGeluK * (1.0f + 3.0f * kGeluC * x.square());
            Mat local = (0.5f * (1.0f + t.array()) + 0.5f * x * dt).matrix();
            pa->accumulate((self->grad.array() * local.array()).matrix());
        };
    }
    return Var(std::move(out));
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, Scalar eps) {
    check(gamma.cols() == a.cols() && beta.cols() == a.cols(), "layer_norm shape mismatch");
    const Mat& x = a.value();
    const auto d = static_cast<Scalar>(x.cols());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = x.rowwise().mean();
    Mat centered = x.colwise() - mean;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
        ((centered.array().square().rowwise().sum() / d) + eps).rsqrt().matrix();
    Mat xhat = (centered.array().colwise() * inv_std.array()).matrix();
    Mat value = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
    value.rowwise() += beta.value().row(0);
    auto out = make_output(std::move(value), {&a, &gamma, &beta});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        Node* pg = gamma.node();
        Node* pb = beta.node();
        out->backward = [self, pa, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), d] {
            const Mat& dy = self->grad;
            if (pg->requires_grad) pg->accumulate((dy.array() * xhat.array()).colwise().sum().matrix());
            if (pb->requires_grad) pb->accumulate(dy.colwise().sum());
            if (pa->requires_grad) {
                Mat dxhat = (dy.array().rowwise() * pg->value.row(0).array()).matrix();
                Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m1 = dxhat.rowwise().sum() / d;
                Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m2 = (dxhat.array() * xhat.array()).rowwise().sum().matrix() / d;
                Mat dx = dxhat;
                dx.colwise() -= m1;
                dx -= (xhat.array().colwise() * m2.array()).matrix();
                dx = (dx.array().colwise() * inv_std.array()).matrix();
                pa->accumulate(dx);
            }
        };
    }
    return Var(std::move(out));
}

Var softmax_rows(const Var& a, const Mat* mask) {
    Mat z = a.value();
    if (mask) {
        check(mask->rows() == z.rows() && mask->cols() == z.cols(), "softmax mask shape mismatch");
        z += *mask;
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mx = z.rowwise().maxCoeff();
    Mat e = (z.colwise() - mx).array().exp().matrix();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sums = e.rowwise().sum();
    Mat p = (e.array().colwise() / sums.array()).matrix();
    auto out = make_output(p, {&a});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        out->backward = [self, pa] {
            const Mat& s = self->value;
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = (self->grad.array() * s.array()).rowwise().sum().matrix();
            Mat g = self->grad;
            g.colwise() -= dot;
            pa->accumulate((g.array() * s.array()).matrix());
        };
    }
    return Var(std::move(out));
}

Var embedding(const Var& table, const std::vector<int>& ids) {
    Mat value(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        check(ids[i] >= 0 && ids[i] < table.rows(), "embedding id out of range");
        value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    auto out = make_output(std::move(value), {&table});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pt = table.node();
        out->backward = [self, pt, ids] {
            if (pt->grad.size() == 0) pt->grad = Mat::Zero(pt->value.rows(), pt->value.cols());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                pt->grad.row(ids[i]) += self->grad.row(static_cast<Eigen::Index>(i));
            }
        };
    }
    return Var(std::move(out));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    check(start >= 0 && start + count <= a.cols(), "slice_cols out of range");
    auto out = make_output(a.value().middleCols(start, count), {&a});
    if (out->requires_grad) {
        Node* self = out.get();
        Node* pa = a.node();
        out->backward = [self, pa, start, count] {
            if (pa->grad.size() == 0) pa->grad = Mat::Zero(pa->value.rows(), pa->value.cols());
            pa->grad.middleCols(start, count) += self->grad;
        };
    }
    return Var(std::move(out));
}

Var concat_cols(const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_cols needs at least one part");
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        check(p.rows() == parts.front().rows(), "concat_cols row mismatch");
        total += p.cols();
    }
    Mat value(parts.front().rows(), total);
    Eigen::Index offset = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        value.middleCols(offset, p.cols()) = p.value();
        offset += p.cols();
        needs_grad = needs_grad || p.requires_grad();
    }
    auto out = std::make_shared<Node>();
    out->value = std::move(value);
    out->requires_grad = needs_grad && grad_enabled();
    if (out->requires_grad) {
        for (const auto& p : parts) out->parents.push_back(p.shared());
        Node* self = out.get();
        out->backward = [self] {
            Eigen::Index off = 0;
            for (const auto& parent : self->parents) {
                const Eigen::Index c = parent->value.cols();
                if (parent->requires_grad) parent->accumulate(self->grad.middleCols(off, c));
                off += c;
            }
        };
    }
    return Var(std::move(out));
}

Mat log_softmax_rows(const Mat& logits) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mx = logits.rowwise().maxCoeff();
    Mat shifted = logits.colwise() - mx;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lse = shifted.array().exp().rowwise().sum().log().matrix();
    shifted.colwise() -= lse;
    return shifted;
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets, int ignore_index) {
    check(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy target count mismatch");
    Mat logp = log_softmax_rows(logits.value());
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] == ignore_index) continue;
        check(targets[i] >= 0 && targets[i] < logits.cols(), "cross_entropy target out of range");
        total -= logp(static_cast<Eigen::Index>(i), targets[i]);
        ++count;
    }
    Mat value(1, 1);
    value(0, 0) = count > 0 ? static_cast<Scalar>(total / count) : Scalar(0);
    auto out = make_output(std::move(value), {&logits});
    if (out->requires_grad && count > 0) {
        Node* self = out.get();
        Node* pl = logits.node();
        out->backward = [self, pl, targets, ignore_index, count, logp = std::move(logp)] {
            Mat g = logp.array().exp().matrix();
            for (std::size_t i = 0; i < targets.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                if (targets[i] == ignore_index) {
                    g.row(r).setZero();
                } else {
                    g(r, targets[i]) -= 1.0f;
                }
            }
            pl->accumulate(g * (self->grad(0, 0) / static_cast<Scalar>(count)));
        };
    }
    return Var(std::move(out));
}

}  // namespace compass::nn

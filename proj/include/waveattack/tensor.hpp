#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "waveattack/error.hpp"
#include "waveattack/rng.hpp"

namespace waveattack {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

template <typename T>
struct TensorImpl;

// Thread-local autograd switch. Forward passes made under NoGradGuard record
// no graph, which keeps evaluation loops cheap.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Per-backward-pass gradient buffers. Execution gradients are kept separate
// from the persistent Tensor::grad accumulators so that running backward()
// twice exactly doubles leaf gradients instead of compounding through
// intermediate nodes.
template <typename T>
class GradStore {
public:
    std::vector<T>& of(const TensorImpl<T>* t);
    const std::vector<T>* find(const TensorImpl<T>* t) const {
        auto it = bufs_.find(t);
        return it == bufs_.end() ? nullptr : &it->second;
    }
    auto begin() const { return bufs_.begin(); }
    auto end() const { return bufs_.end(); }

private:
    std::unordered_map<const TensorImpl<T>*, std::vector<T>> bufs_;
};

template <typename T>
struct Node {
    std::vector<std::shared_ptr<TensorImpl<T>>> parents;
    TensorImpl<T>* out = nullptr;  // non-owning; the impl owns this node
    std::function<void(GradStore<T>&)> apply;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // persistent accumulator, sized lazily
    bool requires_grad = false;
    std::shared_ptr<Node<T>> grad_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
};

template <typename T>
std::vector<T>& GradStore<T>::of(const TensorImpl<T>* t) {
    auto& buf = bufs_[t];
    if (buf.empty()) buf.assign(t->data.size(), T(0));
    return buf;
}

// Dense row-major tensor handle with reverse-mode autodiff. Value semantics:
// copies share the underlying buffer. Data is immutable once the tensor has
// entered a computation graph; only gradient accumulation and optimizer
// updates on leaves mutate state.
template <typename T = float>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) { return filled(std::move(shape), T(0)); }

    static Tensor filled(Shape shape, T value) {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(static_cast<std::size_t>(shape_numel(t.impl_->shape)), value);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw_shape("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        return t;
    }

    static Tensor scalar(T value) { return from_data({}, {value}); }

    static Tensor uniform(Shape shape, T lo, T hi, Rng& rng) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.impl_->data) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    static Tensor normal(Shape shape, T mean, T sd, Rng& rng) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.impl_->data) v = static_cast<T>(rng.normal(mean, sd));
        return t;
    }

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const { return check().shape; }
    std::int64_t dim(std::size_t i) const { return check().shape.at(i); }
    std::size_t rank() const { return check().shape.size(); }
    std::int64_t numel() const { return check().numel(); }

    std::span<const T> data() const { return check().data; }

    // Raw mutable access; valid for leaves only (construction and optimizer
    // updates). Never call on a tensor that feeds an existing graph.
    std::span<T> mutable_data() { return check().data; }

    T item() const {
        if (numel() != 1) throw_usage("item() requires a single-element tensor, got " + shape_str(shape()));
        return check().data[0];
    }

    Tensor& set_requires_grad(bool v = true) {
        check().requires_grad = v;
        return *this;
    }
    bool requires_grad() const { return check().requires_grad; }

    bool has_grad() const { return defined() && !impl_->grad.empty(); }
    std::span<const T> grad() const {
        if (!has_grad()) throw_usage("tensor has no gradient populated");
        return impl_->grad;
    }
    void zero_grad() {
        if (impl_) impl_->grad.clear();
    }

    // Reverse-mode sweep from a scalar. Reachable requires_grad tensors get
    // their persistent grad accumulated (+=); calling twice doubles it.
    void backward() const {
        const TensorImpl<T>& root = check();
        if (root.numel() != 1) throw_usage("backward() requires a scalar loss, got " + shape_str(root.shape));
        GradStore<T> gs;
        gs.of(&root)[0] = T(1);
        if (root.grad_fn) {
            std::vector<Node<T>*> order;
            std::unordered_set<Node<T>*> seen;
            topo(root.grad_fn.get(), seen, order);
            for (auto it = order.rbegin(); it != order.rend(); ++it) (*it)->apply(gs);
        }
        // Fold execution grads into the persistent accumulators.
        std::unordered_set<const TensorImpl<T>*> touched;
        collect_impls(impl_.get(), touched);
        for (const auto& [ti, buf] : gs) {
            if (!touched.count(ti)) continue;
            auto* impl = const_cast<TensorImpl<T>*>(ti);
            if (!impl->requires_grad) continue;
            if (impl->grad.empty()) impl->grad.assign(impl->data.size(), T(0));
            for (std::size_t i = 0; i < buf.size(); ++i) impl->grad[i] += buf[i];
        }
    }

    std::shared_ptr<TensorImpl<T>>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

private:
    TensorImpl<T>& check() const {
        if (!impl_) throw_usage("use of undefined tensor");
        return *impl_;
    }

    static void topo(Node<T>* n, std::unordered_set<Node<T>*>& seen, std::vector<Node<T>*>& order) {
        if (!n || seen.count(n)) return;
        seen.insert(n);
        for (auto& p : n->parents)
            if (p->grad_fn) topo(p->grad_fn.get(), seen, order);
        order.push_back(n);
    }

    static void collect_impls(const TensorImpl<T>* t, std::unordered_set<const TensorImpl<T>*>& out) {
        if (!t || out.count(t)) return;
        out.insert(t);
        if (t->grad_fn)
            for (const auto& p : t->grad_fn->parents) collect_impls(p.get(), out);
    }

    std::shared_ptr<TensorImpl<T>> impl_;
};

// Builds an op result: attaches a graph node iff some parent requires grad.
// `backward` receives the GradStore and must accumulate into parent buffers;
// it is only invoked during a backward pass that reaches this node.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> data, std::vector<Tensor<T>> parents,
                         std::function<void(GradStore<T>&, const std::vector<T>& out_grad)> backward) {
    Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(data));
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (!needs || !grad_mode()) return out;
    out.set_requires_grad(true);
    auto node = std::make_shared<Node<T>>();
    node->out = out.impl().get();
    for (auto& p : parents) node->parents.push_back(p.impl());
    TensorImpl<T>* out_impl = out.impl().get();
    node->apply = [out_impl, fn = std::move(backward)](GradStore<T>& gs) {
        fn(gs, gs.of(out_impl));
    };
    out.impl()->grad_fn = std::move(node);
    return out;
}

}  // namespace waveattack

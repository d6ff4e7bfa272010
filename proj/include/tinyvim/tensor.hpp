#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tinyvim/common.hpp"

namespace tinyvim {

// Dense N-dimensional array of real scalars, row-major. Feature maps use
// NCHW order. A Tensor is a value-semantic handle onto shared storage;
// gradient buffers live beside the values and are allocated lazily.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> dims) {
        Tensor t;
        t.st_ = std::make_shared<Storage>();
        t.st_->dims = std::move(dims);
        t.st_->data.assign(check_dims(t.st_->dims), T(0));
        return t;
    }

    static Tensor full(std::vector<int> dims, T value) {
        Tensor t = zeros(std::move(dims));
        for (auto& v : t.st_->data) v = value;
        return t;
    }

    static Tensor from(std::vector<int> dims, std::vector<T> values) {
        Tensor t;
        t.st_ = std::make_shared<Storage>();
        t.st_->dims = std::move(dims);
        if (check_dims(t.st_->dims) != static_cast<int64_t>(values.size()))
            throw std::invalid_argument("Tensor::from: dims do not match value count");
        t.st_->data = std::move(values);
        return t;
    }

    static Tensor scalar(T v) { return from({1}, {v}); }

    bool defined() const { return static_cast<bool>(st_); }
    const std::vector<int>& dims() const { return st_->dims; }
    int ndim() const { return static_cast<int>(st_->dims.size()); }
    int dim(int i) const { return st_->dims.at(static_cast<size_t>(i)); }
    int64_t size() const { return st_ ? static_cast<int64_t>(st_->data.size()) : 0; }

    T* data() { return st_->data.data(); }
    const T* data() const { return st_->data.data(); }
    std::vector<T>& values() { return st_->data; }
    const std::vector<T>& values() const { return st_->data; }

    bool requires_grad() const { return st_ && st_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        st_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return st_ && !st_->grad.empty(); }
    // Allocates a zero gradient buffer on first use.
    T* grad() {
        if (st_->grad.empty()) st_->grad.assign(st_->data.size(), T(0));
        return st_->grad.data();
    }
    // nullptr when no gradient has been accumulated; lets backward rules
    // skip branches the loss never touched.
    T* grad_if_allocated() { return st_->grad.empty() ? nullptr : st_->grad.data(); }
    const T* grad_if_allocated() const { return st_->grad.empty() ? nullptr : st_->grad.data(); }
    void zero_grad() {
        if (st_) std::fill(st_->grad.begin(), st_->grad.end(), T(0));
    }

    Tensor grad_tensor() const {
        Tensor g = zeros(st_->dims);
        if (!st_->grad.empty()) g.st_->data = st_->grad;
        return g;
    }

    // Deep copy of values only (fresh storage, no grad, no tracking).
    Tensor clone() const {
        Tensor t;
        t.st_ = std::make_shared<Storage>();
        t.st_->dims = st_->dims;
        t.st_->data = st_->data;
        return t;
    }

    bool same_dims(const Tensor& o) const { return st_->dims == o.st_->dims; }

    template <class... I>
    T& at(I... idx) {
        return st_->data[offset_of(idx...)];
    }
    template <class... I>
    const T& at(I... idx) const {
        return st_->data[offset_of(idx...)];
    }

    bool shares_storage(const Tensor& o) const { return st_ == o.st_; }

private:
    struct Storage {
        std::vector<int> dims;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
    };

    static int64_t check_dims(const std::vector<int>& dims) {
        if (dims.empty()) throw std::invalid_argument("Tensor: rank must be >= 1");
        int64_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive");
            n *= d;
        }
        return n;
    }

    template <class... I>
    int64_t offset_of(I... idx) const {
        const int n = sizeof...(idx);
        if (n != ndim()) throw std::invalid_argument("Tensor::at: index rank mismatch");
        int64_t pos = 0;
        int i = 0;
        ((pos = pos * st_->dims[i++] + static_cast<int64_t>(idx)), ...);
        return pos;
    }

    std::shared_ptr<Storage> st_;
};

// Ordered record of executed ops. Appending happens during forward under a
// TapeScope; backward replays the rules in reverse order, accumulating into
// the lazily allocated grad buffers. Single-owner, single-threaded.
template <typename T>
class GradTape {
public:
    void record(std::function<void()> backward_rule) { ops_.push_back(std::move(backward_rule)); }

    size_t num_ops() const { return ops_.size(); }

    void backward(Tensor<T>& loss) {
        if (loss.size() != 1)
            throw std::invalid_argument("GradTape::backward: loss must be a scalar tensor");
        loss.grad()[0] += T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> ops_;
};

namespace detail {
template <typename T>
inline GradTape<T>*& active_tape_slot() {
    thread_local GradTape<T>* tape = nullptr;
    return tape;
}
}  // namespace detail

template <typename T>
inline GradTape<T>* active_tape() {
    return detail::active_tape_slot<T>();
}

// RAII activation of a tape for the current thread.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(GradTape<T>& tape) : prev_(detail::active_tape_slot<T>()) {
        detail::active_tape_slot<T>() = &tape;
    }
    ~TapeScope() { detail::active_tape_slot<T>() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradTape<T>* prev_;
};

namespace detail {
template <typename T>
inline bool recording(const Tensor<T>& a) {
    return active_tape<T>() != nullptr && a.requires_grad();
}
template <typename T, typename... R>
inline bool recording(const Tensor<T>& a, const R&... rest) {
    return recording(a) || recording(rest...);
}
}  // namespace detail

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!finite_checks_enabled()) return;
    const T* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(p[i])))
            throw std::runtime_error(std::string(op) + ": non-finite value at flat index " +
                                     std::to_string(i));
    }
}

}  // namespace tinyvim

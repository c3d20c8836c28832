#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <new>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace docbin::nn {

/// 64-byte aligned storage. Eigen picks its vectorized code path from the
/// buffer address, so a fixed alignment keeps float results reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
        return true;
    }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW shape. Vectors and scalars use trailing 1s.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    [[nodiscard]] std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }

    friend bool operator==(const Shape&, const Shape&) = default;

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
        return os.str();
    }
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {
        if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
            throw ShapeError("negative tensor dimension " + shape.str());
        }
    }
    Tensor(Shape shape, Buffer<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ShapeError("data size does not match shape " + shape_.str());
        }
    }
    Tensor(Shape shape, const std::vector<T>& data) : Tensor(shape, Buffer<T>(data.begin(), data.end())) {}

    static Tensor scalar(T v) { return Tensor({1, 1, 1, 1}, v); }

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    [[nodiscard]] T* data() { return data_.data(); }
    [[nodiscard]] const T* data() const { return data_.data(); }
    [[nodiscard]] std::span<T> values() { return data_; }
    [[nodiscard]] std::span<const T> values() const { return data_; }
    [[nodiscard]] Buffer<T>& storage() { return data_; }
    [[nodiscard]] const Buffer<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    [[nodiscard]] std::size_t index(int n, int c, int h, int w) const {
        assert(n < shape_.n && c < shape_.c && h < shape_.h && w < shape_.w);
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    [[nodiscard]] T item() const {
        if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape s) const {
        if (s.size() != size()) throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
        return Tensor(s, data_);
    }

    /// Sub-batch [begin, begin + count) along N.
    Tensor slice_batch(int begin, int count) const {
        Shape s = shape_;
        s.n = count;
        const auto stride = shape_.sample();
        Buffer<T> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                           data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
        return Tensor(s, std::move(out));
    }

    template <typename U>
    Tensor<U> cast() const {
        Buffer<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    Tensor& operator+=(const Tensor& o) {
        if (o.shape_ != shape_) throw ShapeError("+= shape mismatch " + shape_.str() + " vs " + o.shape_.str());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    Buffer<T> data_;
};

/// Stacks equally shaped tensors along N.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
    if (items.empty()) throw ShapeError("stack_batch of zero tensors");
    Shape s = items.front().shape();
    const int per = s.n;
    Buffer<T> out;
    out.reserve(s.size() * items.size());
    for (const auto& t : items) {
        if (t.shape() != s) throw ShapeError("stack_batch shape mismatch " + s.str() + " vs " + t.shape().str());
        out.insert(out.end(), t.storage().begin(), t.storage().end());
    }
    s.n = per * static_cast<int>(items.size());
    return Tensor<T>(s, std::move(out));
}

/// Periodic shuffle: (N, C*r*r, H, W) -> (N, C, H*r, W*r).
/// Input channel c*r*r + i*r + j lands at output row h*r + i, column w*r + j.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& in, int r) {
    const Shape& s = in.shape();
    if (r < 1) throw ShapeError("pixel_shuffle: upscale factor must be >= 1");
    if (s.c % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(s.c) + " not divisible by r^2=" +
                         std::to_string(r * r));
    }
    const int oc = s.c / (r * r);
    Tensor<T> out({s.n, oc, s.h * r, s.w * r});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < oc; ++c)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) {
                    const int ic = c * r * r + i * r + j;
                    for (int h = 0; h < s.h; ++h)
                        for (int w = 0; w < s.w; ++w) out.at(n, c, h * r + i, w * r + j) = in.at(n, ic, h, w);
                }
    return out;
}

/// Inverse of pixel_shuffle: (N, C, H*r, W*r) -> (N, C*r*r, H, W).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& in, int r) {
    const Shape& s = in.shape();
    if (r < 1) throw ShapeError("pixel_unshuffle: factor must be >= 1");
    if (s.h % r != 0 || s.w % r != 0) throw ShapeError("pixel_unshuffle: spatial size not divisible by r");
    const int oh = s.h / r;
    const int ow = s.w / r;
    Tensor<T> out({s.n, s.c * r * r, oh, ow});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) {
                    const int oc = c * r * r + i * r + j;
                    for (int h = 0; h < oh; ++h)
                        for (int w = 0; w < ow; ++w) out.at(n, oc, h, w) = in.at(n, c, h * r + i, w * r + j);
                }
    return out;
}

}  // namespace docbin::nn

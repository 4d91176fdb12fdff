#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypergrid {

// Dense row-major tensor. float is the training precision, double is used for
// gradient verification. No broadcasting, no views: slices copy.
template <typename T>
class TensorT {
public:
    using value_type = T;

    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        const std::size_t want = checked_numel(shape_);
        if (want != data_.size()) {
            throw std::invalid_argument("tensor: got " + std::to_string(data_.size()) +
                                        " values for a shape holding " + std::to_string(want));
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    // Row-major offset of a full coordinate vector, bounds-checked.
    std::size_t offset(std::span<const std::size_t> index) const {
        if (index.size() != shape_.size())
            throw std::invalid_argument("tensor: index rank " + std::to_string(index.size()) +
                                        " vs tensor rank " + std::to_string(shape_.size()));
        std::size_t off = 0;
        for (std::size_t a = 0; a < shape_.size(); ++a) {
            if (index[a] >= shape_[a])
                throw std::out_of_range("tensor: index " + std::to_string(index[a]) +
                                        " out of range on axis " + std::to_string(a));
            off = off * shape_[a] + index[a];
        }
        return off;
    }

    T& at(std::initializer_list<std::size_t> index) {
        return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
    }
    const T& at(std::initializer_list<std::size_t> index) const {
        return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    // Copy of the sub-block spanned by per-axis half-open [lo, hi) ranges.
    TensorT slice(std::span<const std::pair<std::size_t, std::size_t>> ranges) const {
        if (ranges.size() != shape_.size())
            throw std::invalid_argument("slice: need one range per axis");
        std::vector<std::size_t> out_shape(ranges.size());
        for (std::size_t a = 0; a < ranges.size(); ++a) {
            const auto [lo, hi] = ranges[a];
            if (lo >= hi || hi > shape_[a])
                throw std::out_of_range("slice: bad range [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + ") on axis " + std::to_string(a) +
                                        " of extent " + std::to_string(shape_[a]));
            out_shape[a] = hi - lo;
        }
        TensorT out(out_shape);
        std::vector<std::size_t> idx(ranges.size(), 0);
        for (std::size_t flat = 0; flat < out.size(); ++flat) {
            std::size_t src = 0;
            for (std::size_t a = 0; a < idx.size(); ++a) src = src * shape_[a] + ranges[a].first + idx[a];
            out.data_[flat] = data_[src];
            for (std::size_t a = idx.size(); a-- > 0;) {
                if (++idx[a] < out_shape[a]) break;
                idx[a] = 0;
            }
        }
        return out;
    }

    TensorT slice(std::initializer_list<std::pair<std::size_t, std::size_t>> ranges) const {
        return slice(std::span<const std::pair<std::size_t, std::size_t>>(ranges.begin(), ranges.size()));
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> vals(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) vals[i] = static_cast<U>(data_[i]);
        return TensorT<U>(shape_, std::move(vals));
    }

private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw std::invalid_argument("tensor: zero extent in shape");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace hypergrid

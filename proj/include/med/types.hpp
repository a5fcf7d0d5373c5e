#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace med {

using Point = std::vector<double>;

/// Row-major set of points sharing one dimension.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t dim) : dim_(dim) {}
    PointSet(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}

    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    void push_back(std::span<const double> x) {
        if (x.size() != dim_) throw std::invalid_argument("PointSet::push_back: dimension mismatch");
        data_.insert(data_.end(), x.begin(), x.end());
    }
    void reserve(std::size_t count) { data_.reserve(count * dim_); }
    void clear() { data_.clear(); }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& raw() const { return data_; }

    Point point(std::size_t i) const {
        auto r = (*this)[i];
        return {r.begin(), r.end()};
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// Error taxonomy. The CLI maps UsageError to exit code 2 and everything else to 3.
struct MedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : MedError {
    using MedError::MedError;
};
struct ProtocolError : MedError {
    using MedError::MedError;
};
struct NumericError : MedError {
    using MedError::MedError;
};

}  // namespace med

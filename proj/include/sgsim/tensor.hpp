#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgsim {

/// Dense row-major tensor. Rank 1 or 2 is all the model needs.
template <typename S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> shp) : shape(std::move(shp)) {
        data.assign(numel(shape), S(0));
    }
    TensorT(std::vector<int> shp, std::vector<S> vals) : shape(std::move(shp)), data(std::move(vals)) {
        if (data.size() != numel(shape))
            throw std::invalid_argument("tensor init: value count does not match shape");
    }

    static size_t numel(const std::vector<int>& shp) {
        size_t n = 1;
        for (int d : shp) {
            if (d < 0) throw std::invalid_argument("tensor shape has negative dim");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return data.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const {
        if (shape.size() < 2) return shape.empty() ? 1 : shape[0];
        return shape[1];
    }

    S& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    const S& at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
    S& operator[](size_t i) { return data[i]; }
    S operator[](size_t i) const { return data[i]; }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    template <typename T>
    TensorT<T> cast() const {
        TensorT<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

inline std::string shape_str(const std::vector<int>& shp) {
    std::string s = "[";
    for (size_t i = 0; i < shp.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shp[i]);
    }
    return s + "]";
}

}  // namespace sgsim

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "evtta/errors.hpp"

namespace evtta {

/// Dense row-major f64 tensor. Shape is dynamic; indexing is left to the
/// layer kernels, which know their own layouts.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.assign(shape_product(t.shape), 0.0);
        return t;
    }

    static std::size_t shape_product(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

} // namespace evtta

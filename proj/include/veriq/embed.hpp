#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "veriq/text.hpp"
#include "veriq/value.hpp"

namespace veriq {

using Embedding = std::vector<float>;

inline double cosine(const Embedding& a, const Embedding& b) {
    double dot = 0.0;
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return dot;
}

inline double l2_norm(const Embedding& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

// Text embedding backend. Implementations must be deterministic functions of
// the input text and emit unit-norm vectors of a fixed dimension.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
};

// Feature-hash bag-of-tokens embedder: each token is hashed into one of D
// buckets, counts are accumulated and the vector is L2-normalized. Fully
// offline and reproducible. Empty text maps to the fixed unit vector e_0 so
// the unit-norm invariant holds for every embedding.
class FeatureHashEmbedder final : public Embedder {
public:
    explicit FeatureHashEmbedder(size_t dim = 256) : dim_(dim) {}

    size_t dimension() const override { return dim_; }

    Embedding embed(std::string_view text) const override {
        Embedding v(dim_, 0.0f);
        auto tokens = tokenize(text);
        if (tokens.empty()) {
            v[0] = 1.0f;
            return v;
        }
        for (const auto& tok : tokens) v[fnv1a(tok) % dim_] += 1.0f;
        double norm = l2_norm(v);
        for (float& x : v) x = static_cast<float>(x / norm);
        return v;
    }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

    size_t dim_;
};

}  // namespace veriq

#pragma once
// nn.hpp - parameter store, Adam optimizer, and conv building blocks shared by
// the generators, discriminators, and the phantom classifier.

#include <map>
#include <string>
#include <vector>

#include "uct/autodiff.hpp"
#include "uct/rng.hpp"

namespace uct::nn {

// Ordered name -> trainable leaf map. Iteration order is the registration
// order, which makes serialization and optimizer sweeps deterministic.
class ParamStore {
public:
    ad::Var add(const std::string& name, Tensor init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::pair<std::string, ad::Var>>& entries() const { return entries_; }
    long total_count() const;
    void set_trainable(bool trainable);
    std::vector<double> flat_values() const;
    void load_flat_values(const std::vector<double>& v);

private:
    std::vector<std::pair<std::string, ad::Var>> entries_;
    std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.9999;
    double eps = 1e-8;
};

// One optimizer instance per parameter store; moments keyed by entry order.
class Adam {
public:
    Adam() = default;
    Adam(ParamStore* params, AdamConfig cfg);
    void step(double lr);
    void zero_grad();

    // moment access for checkpointing
    std::vector<Tensor>& m() { return m_; }
    std::vector<Tensor>& v() { return v_; }
    long& t() { return t_; }

private:
    ParamStore* params_ = nullptr;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

// Kaiming-style init for conv/linear weights.
Tensor init_conv_weight(int cout, int cin, int k, Rng& rng);
Tensor init_linear_weight(int out, int in, Rng& rng);

struct Conv2d {
    ad::Var w, b;
    int stride = 1, pad = 1;
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
           Rng& rng);
    ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

}  // namespace uct::nn

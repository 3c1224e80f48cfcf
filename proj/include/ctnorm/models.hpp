#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ctnorm/checkpoint.hpp"
#include "ctnorm/optim.hpp"
#include "ctnorm/tensor.hpp"

namespace ctnorm::gan {

struct GeneratorConfig {
    int n_resblocks = 8;
    int channels = 32;
    // z upsample factor is fixed at 2: the 2.0mm -> 1.0mm contract

    void validate() const;
};

struct DiscriminatorConfig {
    int n_stages = 3;      // stride-2 convolutions
    int base_channels = 32;

    void validate() const;
};

// Convolution layer with stored activations for the hand-wired backward
// pass. Spectral layers keep the effective weight W / sigma of the last
// forward; gradients flow through it with sigma treated as constant.
struct Conv3dLayer {
    nn::Parameter w;
    nn::Parameter b;
    int stride = 1;
    int pad = 1;
    bool spectral = false;

    Tensor weff;          // last effective weight (spectral only)
    double sigma = 1.0;   // last sigma estimate (spectral only)
    const Tensor* in = nullptr;
    Tensor out;
    Tensor din;

    Conv3dLayer() = default;
    Conv3dLayer(const std::string& name, int cout, int cin, int k, int stride_, int pad_,
                bool spectral_, uint64_t seed);

    const Tensor& forward(const Tensor& x, int power_iters);
    // accumulates w.grad / b.grad; computes din when input_grad is set
    const Tensor& backward(const Tensor& dy, bool input_grad);

    void collect(std::vector<nn::Parameter*>& out_params);
};

// EDSR-style residual generator: head conv, residual blocks with a global
// feature skip, tail conv to 2C channels, z-upshuffle, output conv. Doubles
// the z extent of its input.
class Generator {
public:
    Generator(const GeneratorConfig& cfg, uint64_t seed);

    const Tensor& forward(const Tensor& x);
    void backward(const Tensor& dy); // parameter grads only; input grad unused

    std::vector<nn::Parameter*> params();
    const GeneratorConfig& config() const { return cfg_; }

    std::vector<nn::NamedTensor> state(const std::string& prefix) const;
    void load_state(const std::vector<nn::NamedTensor>& ts, const std::string& prefix);

private:
    struct ResBlock {
        Conv3dLayer conv1, conv2;
        Tensor relu_out;
        Tensor sum_out;
        Tensor dsum;
    };

    GeneratorConfig cfg_;
    Conv3dLayer head_;
    std::vector<ResBlock> blocks_;
    Conv3dLayer tail_;
    Tensor body_out_;
    Tensor up_out_;
    Conv3dLayer out_conv_;
    Tensor dbuf_a_, dbuf_b_;
};

// Spectrally normalized stride-2 conv stack with LeakyReLU, global average
// pool, and a linear scalar head. Scores are unbounded (hinge formulation).
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, uint64_t seed);

    // power_iters: spectral power iterations per weight for this forward
    // (1 during D updates, 0 to re-estimate sigma without advancing u)
    const Tensor& forward(const Tensor& x, int power_iters);
    // dscores shape (N, 1, 1, 1, 1); returns input gradient when requested
    const Tensor& backward(const Tensor& dscores, bool input_grad);

    std::vector<nn::Parameter*> params();
    std::vector<nn::Parameter*> spectral_params();
    const DiscriminatorConfig& config() const { return cfg_; }

    std::vector<nn::NamedTensor> state(const std::string& prefix) const;
    void load_state(const std::vector<nn::NamedTensor>& ts, const std::string& prefix);

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv3dLayer> convs_;
    std::vector<Tensor> acts_;   // LeakyReLU outputs
    std::vector<Tensor> dacts_;
    Tensor gap_out_;
    Tensor dgap_;
    nn::Parameter fc_w_;
    nn::Parameter fc_b_;
    Tensor fc_weff_;
    double fc_sigma_ = 1.0;
    Tensor scores_;
    Tensor dfc_in_;
    Tensor din_;
};

// Parameter serialization shared by both models: value plus .m/.v Adam
// moments and .u spectral vectors.
std::vector<nn::NamedTensor> parameter_state(const std::vector<const nn::Parameter*>& ps,
                                             const std::string& prefix);
void load_parameter_state(std::vector<nn::Parameter*> ps, const std::vector<nn::NamedTensor>& ts,
                          const std::string& prefix);

} // namespace ctnorm::gan

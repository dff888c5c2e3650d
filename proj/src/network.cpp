#include "sketchloom/nn/network.hpp"

namespace sketchloom::nn {

void NetworkSpec::validate() const {
    require(kind == "unet_generator" || kind == "patchgan_discriminator",
            "NetworkSpec: unknown kind '" + kind + "'");
    require(in_channels >= 1 && out_channels >= 1, "NetworkSpec: channels must be positive");
    require(base_width >= 1, "NetworkSpec: base_width must be positive");
    require(dropout_p >= 0.0 && dropout_p < 1.0, "NetworkSpec: dropout_p in [0,1)");
    if (kind == "unet_generator")
        require(depth >= 2, "NetworkSpec: generator depth must be at least 2");
    else
        require(depth >= 1, "NetworkSpec: discriminator depth must be at least 1");
}

int patchgan_output_side(int input_side, int depth) {
    int side = input_side;
    for (int i = 0; i < depth; ++i) side = detail::conv_out_side(side, 4, 2, 1);
    side = detail::conv_out_side(side, 4, 1, 1);  // stride-1 block
    side = detail::conv_out_side(side, 4, 1, 1);  // score head
    require(side > 0, "patchgan_output_side: input too small for this depth");
    return side;
}

}  // namespace sketchloom::nn

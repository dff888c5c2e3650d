#pragma once

#include <utility>

#include "sketchloom/image.hpp"
#include "sketchloom/rng.hpp"

namespace sketchloom {

struct AugmentParams {
    int resize_to = 286;
    int crop_to = 256;
    double flip_probability = 0.5;
    double max_rotation_deg = 15.0;
    double salt_pepper_fraction = 0.02;
    float fill_value = 1.0f;  // revealed by rotation, white like the backgrounds
};

// Rotates around the image center (bilinear); samples falling outside the
// source frame read fill. Angle 0 is an exact identity.
ImageTensor rotate(const ImageTensor& img, double angle_deg, float fill);

// Sets each pixel (all channels together) to 0 or 1 with equal odds, with
// per-pixel probability `fraction`.
ImageTensor salt_pepper(const ImageTensor& img, double fraction, RngStream& rng);

// Shared-geometry training augmentation: resize both images, rotate by one
// draw from U[-max_rotation_deg, max_rotation_deg], take the same random
// crop_to x crop_to window, flip together with flip_probability, then apply
// salt-pepper noise to the sketch only. The two inputs must share height and
// width; outputs are always crop_to x crop_to.
std::pair<ImageTensor, ImageTensor> augment_pair(const ImageTensor& sketch,
                                                 const ImageTensor& photo,
                                                 const AugmentParams& params,
                                                 RngStream& rng);

}  // namespace sketchloom

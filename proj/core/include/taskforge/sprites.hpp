#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "taskforge/distribution.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

// Procedurally generated images of a single coloured shape on a black
// background, each labelled with both its drawn attributes and two values
// derived from them.
enum class SpriteShape { Ellipse = 0, Rectangle = 1, Triangle = 2 };

struct SpriteSample {
  int size = 0;              // image is size x size
  std::vector<float> image;  // row-major RGB, size*size*3 floats in [0,1]
  SpriteShape shape = SpriteShape::Ellipse;
  int hue_class = 0;         // 0 red, 1 green, 2 blue
  float cs = 0.0f;           // colour score in [0,1]: red = 0, blue = 1
  float blue_circleness = 0.0f;
  // geometry in pixels (at the generated size) and the raw 8-bit colour
  float cx = 0, cy = 0, w = 0, h = 0;
  int hue = 0, sat = 0, val = 0;
};

// Colour score of an 8-bit hue: linear from red (0) to blue (170), with the
// wrap-around half of the red band clamping to 0 and hues past blue to 1.
float colour_score(int hue);

// How much like a blue circle a sprite looks, as a function of its shape
// and colour score:
//   ellipse    min(1, cs + 0.6)
//   rectangle  min(0.8, max(0.2, cs))
//   triangle   max(0, cs - 0.6)
float blue_circleness(SpriteShape shape, float cs);

// Standard 8-bit HSV -> float RGB (hue 0..255 wraps the full circle).
void hsv_to_rgb(int h, int s, int v, float rgb[3]);

// Deterministic batch: sample i depends only on (seed, i), so shards agree
// with the whole. size must be 16 or 32; attribute ranges scale with size.
std::vector<SpriteSample> gen_sprites(int n, int size, std::uint64_t seed);

// Which per-sprite columns a sprite distribution emits.
enum class SpriteField { Image, ShapeOneHot, HueOneHot, ColourScore, BlueCircleness };

WireType sprite_field_type(SpriteField f, int size);

// Draws fresh sprites each batch and emits the requested correlated columns.
std::shared_ptr<Sampler> make_sprite_sampler(int size, std::uint64_t salt,
                                             std::vector<SpriteField> fields);

// Renders an existing sample's columns without regenerating (used by tests).
std::vector<float> sprite_field_value(const SpriteSample& s, SpriteField f);

} // namespace taskforge

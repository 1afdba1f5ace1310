#include "taskforge/sprites.hpp"

#include <algorithm>
#include <cmath>

#include "taskforge/errors.hpp"

namespace taskforge {

float colour_score(int hue) {
  // Centre the red band on 0 so its wrap-around half sits at negative hues.
  int h = hue & 0xff;
  if (h > 213) h -= 256;
  float cs = static_cast<float>(h) / 170.0f;
  return std::clamp(cs, 0.0f, 1.0f);
}

float blue_circleness(SpriteShape shape, float cs) {
  switch (shape) {
    case SpriteShape::Ellipse: return std::min(1.0f, cs + 0.6f);
    case SpriteShape::Rectangle: return std::min(0.8f, std::max(0.2f, cs));
    case SpriteShape::Triangle: return std::max(0.0f, cs - 0.6f);
  }
  return 0.0f;
}

void hsv_to_rgb(int h, int s, int v, float rgb[3]) {
  float sf = static_cast<float>(s) / 255.0f;
  float vf = static_cast<float>(v) / 255.0f;
  float hf = static_cast<float>(h & 0xff) * (6.0f / 256.0f);
  int sector = static_cast<int>(hf) % 6;
  float f = hf - std::floor(hf);
  float p = vf * (1.0f - sf);
  float q = vf * (1.0f - sf * f);
  float t = vf * (1.0f - sf * (1.0f - f));
  switch (sector) {
    case 0: rgb[0] = vf; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = vf; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = vf; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = vf; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = vf; break;
    default: rgb[0] = vf; rgb[1] = p; rgb[2] = q; break;
  }
}

namespace {

bool inside(SpriteShape shape, const SpriteSample& s, float x, float y) {
  float dx = x - s.cx, dy = y - s.cy;
  float hw = s.w * 0.5f, hh = s.h * 0.5f;
  switch (shape) {
    case SpriteShape::Ellipse: {
      float nx = dx / hw, ny = dy / hh;
      return nx * nx + ny * ny <= 1.0f;
    }
    case SpriteShape::Rectangle:
      return std::fabs(dx) <= hw && std::fabs(dy) <= hh;
    case SpriteShape::Triangle: {
      // Isoceles, apex at the top: (cx, cy-hh), (cx-hw, cy+hh), (cx+hw, cy+hh).
      if (dy < -hh || dy > hh) return false;
      // Half-width grows linearly from 0 at the apex to hw at the base.
      float frac = (dy + hh) / (2.0f * hh);
      return std::fabs(dx) <= hw * frac;
    }
  }
  return false;
}

void rasterise(SpriteSample& s) {
  const int size = s.size;
  s.image.assign(static_cast<std::size_t>(size) * size * 3, 0.0f);
  float rgb[3];
  hsv_to_rgb(s.hue, s.sat, s.val, rgb);
  // 4x4 supersampling per pixel gives 17 coverage levels, enough to keep
  // edges smooth at these resolutions while staying exactly reproducible.
  constexpr int kSub = 4;
  // Conservative bounding box to skip the background quickly.
  int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.w * 0.5f)) - 1);
  int x1 = std::min(size - 1, static_cast<int>(std::ceil(s.cx + s.w * 0.5f)) + 1);
  int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.h * 0.5f)) - 1);
  int y1 = std::min(size - 1, static_cast<int>(std::ceil(s.cy + s.h * 0.5f)) + 1);
  for (int py = y0; py <= y1; ++py) {
    for (int px = x0; px <= x1; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          float x = static_cast<float>(px) + (static_cast<float>(sx) + 0.5f) / kSub;
          float y = static_cast<float>(py) + (static_cast<float>(sy) + 0.5f) / kSub;
          if (inside(s.shape, s, x, y)) ++hits;
        }
      if (hits == 0) continue;
      float alpha = static_cast<float>(hits) / (kSub * kSub);
      std::size_t base = (static_cast<std::size_t>(py) * size + px) * 3;
      for (int c = 0; c < 3; ++c) s.image[base + c] = alpha * rgb[c];
    }
  }
}

SpriteSample gen_one(int size, std::uint64_t seed, std::uint64_t index) {
  SpriteSample s;
  s.size = size;
  Rng r = Rng(seed).fork(index);
  // Fixed draw order; changing it would silently change every dataset.
  s.shape = static_cast<SpriteShape>(r.below(3));
  s.hue_class = static_cast<int>(r.below(3));
  const int centres[3] = {0, 85, 170};
  s.hue = (centres[s.hue_class] + static_cast<int>(r.below(17)) - 8 + 256) & 0xff;
  s.sat = 64 + static_cast<int>(r.below(192));
  s.val = 64 + static_cast<int>(r.below(192));
  const float scale = static_cast<float>(size) / 32.0f;
  s.w = static_cast<float>(r.uniform(5.0, 27.0)) * scale;
  s.h = static_cast<float>(r.uniform(5.0, 27.0)) * scale;
  s.cx = static_cast<float>(r.uniform(5.0, 27.0)) * scale;
  s.cy = static_cast<float>(r.uniform(5.0, 27.0)) * scale;
  s.cs = colour_score(s.hue);
  s.blue_circleness = blue_circleness(s.shape, s.cs);
  rasterise(s);
  return s;
}

} // namespace

std::vector<SpriteSample> gen_sprites(int n, int size, std::uint64_t seed) {
  if (size != 16 && size != 32)
    fail("BadSize", "sprite size must be 16 or 32, got " + std::to_string(size));
  std::vector<SpriteSample> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i)
    out.push_back(gen_one(size, seed, static_cast<std::uint64_t>(i)));
  return out;
}

WireType sprite_field_type(SpriteField f, int size) {
  switch (f) {
    case SpriteField::Image:
      return WireType{"img" + std::to_string(size), size * size * 3,
                      WireKind::Unit};
    case SpriteField::ShapeOneHot: return WireType{"shape", 3, WireKind::OneHot};
    case SpriteField::HueOneHot: return WireType{"colour", 3, WireKind::OneHot};
    case SpriteField::ColourScore: return WireType{"cs", 1, WireKind::Unit};
    case SpriteField::BlueCircleness: return WireType{"bc", 1, WireKind::Unit};
  }
  fail("BadField", "unknown sprite field");
}

std::vector<float> sprite_field_value(const SpriteSample& s, SpriteField f) {
  switch (f) {
    case SpriteField::Image: return s.image;
    case SpriteField::ShapeOneHot: {
      std::vector<float> v(3, 0.0f);
      v[static_cast<std::size_t>(s.shape)] = 1.0f;
      return v;
    }
    case SpriteField::HueOneHot: {
      std::vector<float> v(3, 0.0f);
      v[static_cast<std::size_t>(s.hue_class)] = 1.0f;
      return v;
    }
    case SpriteField::ColourScore: return {s.cs};
    case SpriteField::BlueCircleness: return {s.blue_circleness};
  }
  fail("BadField", "unknown sprite field");
}

namespace {

class SpriteSampler final : public Sampler {
public:
  SpriteSampler(int size, std::uint64_t salt, std::vector<SpriteField> fields)
      : size_(size), salt_(salt), fields_(std::move(fields)) {
    if (size_ != 16 && size_ != 32)
      fail("BadSize", "sprite size must be 16 or 32");
    if (fields_.empty())
      fail("BadField", "a sprite distribution needs at least one field");
    for (auto f : fields_) types_.push_back(sprite_field_type(f, size_));
  }

  std::vector<WireType> types() const override { return types_; }

  std::vector<Tensor> sample(int batch, Rng& rng,
                             const EvalContext& ctx) const override {
    (void)ctx;
    std::vector<Tensor> out;
    for (auto& t : types_) out.push_back(Tensor::zeros(batch, t.dim));
    // One master draw per batch keeps the caller's stream consumption
    // independent of the batch size.
    std::uint64_t base = rng.next_u64() ^ salt_;
    for (int b = 0; b < batch; ++b) {
      SpriteSample s = gen_one(size_, base, static_cast<std::uint64_t>(b));
      for (std::size_t f = 0; f < fields_.size(); ++f) {
        std::vector<float> v = sprite_field_value(s, fields_[f]);
        std::copy(v.begin(), v.end(), out[f].data() + out[f].cols() * b);
      }
    }
    return out;
  }

private:
  int size_;
  std::uint64_t salt_;
  std::vector<SpriteField> fields_;
  std::vector<WireType> types_;
};

} // namespace

std::shared_ptr<Sampler> make_sprite_sampler(int size, std::uint64_t salt,
                                             std::vector<SpriteField> fields) {
  return std::make_shared<SpriteSampler>(size, salt, std::move(fields));
}

} // namespace taskforge

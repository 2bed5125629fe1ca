// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dfx/synthface/synthface.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"
#include "dfx/core/rng.hpp"
#include "dfx/synthface/png_io.hpp"

namespace dfx::synthface {

std::string_view to_string(Label label) {
  return label == Label::kReal ? "real" : "fake";
}

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::kNone: return "none";
    case ArtifactKind::kBlendBoundary: return "blend_boundary";
    case ArtifactKind::kEyeAsymmetry: return "eye_asymmetry";
    case ArtifactKind::kTextureNoise: return "texture_noise";
    case ArtifactKind::kMouthWarp: return "mouth_warp";
  }
  return "none";
}

Label parse_label(std::string_view s) {
  if (s == "real") return Label::kReal;
  if (s == "fake") return Label::kFake;
  throw ContractError("unknown label '" + std::string(s) + "'");
}

ArtifactKind parse_artifact_kind(std::string_view s) {
  for (auto k : {ArtifactKind::kNone, ArtifactKind::kBlendBoundary,
                 ArtifactKind::kEyeAsymmetry, ArtifactKind::kTextureNoise,
                 ArtifactKind::kMouthWarp})
    if (to_string(k) == s) return k;
  throw ContractError("unknown artifact kind '" + std::string(s) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ContractError("unknown split '" + std::string(s) + "'");
}

namespace {

using Canvas = std::vector<float>;

struct FaceStyle {
  FaceGeometry geo;
  std::array<double, 3> bg_top, bg_bottom, skin, hair, lips;
  double light_x, light_y;
  double eye_rx, eye_ry;
  double mouth_rx, mouth_ry;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

FaceStyle make_style(std::uint64_t seed, int index, int side) {
  Rng rng(derive_seed(seed, "face", static_cast<std::uint64_t>(index)));
  const double s = side / 64.0;
  FaceStyle st{};
  auto& g = st.geo;
  g.cx = (32 + uniform(rng, -1, 1)) * s;
  g.cy = (33 + uniform(rng, -1, 1)) * s;
  g.rx = (17 + uniform(rng, -1, 1)) * s;
  g.ry = (21 + uniform(rng, -1, 1)) * s;
  g.eye_dx = (7 + uniform(rng, -0.6, 0.6)) * s;
  g.eye_y = g.cy - (5 + uniform(rng, -0.6, 0.6)) * s;
  g.mouth_y = g.cy + (10 + uniform(rng, -0.8, 0.8)) * s;
  g.seam_row = static_cast<int>(std::lround(g.cy + 0.72 * g.ry));
  const double tone = uniform(rng, -0.03, 0.03);
  st.skin = {0.86 + tone, 0.68 + tone, 0.56 + tone * 0.8};
  const double bg = uniform(rng, 0.36, 0.44);
  st.bg_top = {bg, bg * uniform(rng, 0.8, 1.1), bg * uniform(rng, 0.8, 1.2)};
  st.bg_bottom = {st.bg_top[0] * 0.7, st.bg_top[1] * 0.7, st.bg_top[2] * 0.75};
  const double h = uniform(rng, 0.15, 0.25);
  st.hair = {h, h * 0.8, h * 0.6};
  st.lips = {0.68 + uniform(rng, -0.05, 0.05), 0.28, 0.28};
  st.light_x = uniform(rng, -0.3, 0.3);
  st.light_y = uniform(rng, -0.4, 0.0);
  st.eye_rx = (3.2 + uniform(rng, -0.4, 0.4)) * s;
  st.eye_ry = (1.9 + uniform(rng, -0.3, 0.3)) * s;
  st.mouth_rx = (6 + uniform(rng, -0.8, 0.8)) * s;
  st.mouth_ry = (1.7 + uniform(rng, -0.3, 0.3)) * s;
  return st;
}

void blend(Canvas& img, int side, int y, int x, const std::array<double, 3>& c,
           double alpha) {
  if (alpha <= 0) return;
  float* p = &img[(static_cast<std::size_t>(y) * side + x) * kChannels];
  for (int k = 0; k < 3; ++k)
    p[k] = static_cast<float>(p[k] * (1 - alpha) + c[k] * alpha);
}

// Soft-edged ellipse coverage in [0, 1].
double ellipse_cover(double x, double y, double cx, double cy, double rx,
                     double ry, double soft) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  const double r = std::sqrt(dx * dx + dy * dy);
  const double edge = soft / std::min(rx, ry);
  return 1.0 - smoothstep(1.0 - edge, 1.0 + edge, r);
}

Canvas render_face(const FaceStyle& st, int side) {
  Canvas img(static_cast<std::size_t>(side) * side * kChannels);
  const auto& g = st.geo;
  for (int y = 0; y < side; ++y) {
    const double t = static_cast<double>(y) / (side - 1);
    for (int x = 0; x < side; ++x) {
      float* p = &img[(static_cast<std::size_t>(y) * side + x) * kChannels];
      for (int k = 0; k < 3; ++k)
        p[k] = static_cast<float>(st.bg_top[k] * (1 - t) + st.bg_bottom[k] * t);
    }
  }
  const double px = 0.5;  // sample at pixel centres
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double fx = x + px, fy = y + px;
      const double cover = ellipse_cover(fx, fy, g.cx, g.cy, g.rx, g.ry, 1.2);
      if (cover <= 0) continue;
      const double nx = (fx - g.cx) / g.rx - st.light_x;
      const double ny = (fy - g.cy) / g.ry - st.light_y;
      const double shade = 1.0 - 0.22 * (nx * nx + ny * ny);
      std::array<double, 3> c = {st.skin[0] * shade, st.skin[1] * shade,
                                 st.skin[2] * shade};
      blend(img, side, y, x, c, cover);
      // Hair cap over the forehead.
      const double hair = smoothstep(-0.5, -0.62, (fy - g.cy) / g.ry) * cover;
      blend(img, side, y, x, st.hair, hair);
    }
  }
  for (int sign : {-1, 1}) {
    const double ex = g.cx + sign * g.eye_dx;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double fx = x + px, fy = y + px;
        blend(img, side, y, x, {0.95, 0.95, 0.93},
              ellipse_cover(fx, fy, ex, g.eye_y, st.eye_rx, st.eye_ry, 0.6));
        blend(img, side, y, x, {0.12, 0.09, 0.07},
              ellipse_cover(fx, fy, ex, g.eye_y, st.eye_ry * 0.9, st.eye_ry * 0.9, 0.5));
        // Brow.
        blend(img, side, y, x, st.hair,
              0.8 * ellipse_cover(fx, fy, ex, g.eye_y - 3.2 * side / 64.0,
                                  st.eye_rx * 1.1, 0.7 * side / 64.0, 0.4));
      }
    }
  }
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double fx = x + px, fy = y + px;
      // Nose shadow.
      const double nose = ellipse_cover(fx, fy, g.cx + 0.8, g.cy + 1.5 * side / 64.0,
                                        0.9 * side / 64.0, 4.0 * side / 64.0, 0.8);
      blend(img, side, y, x, {st.skin[0] * 0.7, st.skin[1] * 0.65, st.skin[2] * 0.6},
            0.5 * nose);
      blend(img, side, y, x, st.lips,
            ellipse_cover(fx, fy, g.cx, g.mouth_y, st.mouth_rx, st.mouth_ry, 0.7));
    }
  }
  return img;
}

// Faint period-2 grid left by upsampling layers; applied with the same
// window as the visible artifact so the change stays local.
constexpr double kGridAmplitude = 0.08;

void add_grid(Canvas& img, int side, int y, int x, double weight) {
  const double g = ((x + y) % 2 == 0 ? 1.0 : -1.0) * kGridAmplitude * weight;
  float* p = &img[(static_cast<std::size_t>(y) * side + x) * kChannels];
  for (int k = 0; k < 3; ++k) p[k] = static_cast<float>(p[k] + g);
}

float sample_bilinear(const Canvas& img, int side, double y, double x, int c) {
  y = std::clamp(y, 0.0, side - 1.0);
  x = std::clamp(x, 0.0, side - 1.0);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, side - 1), x1 = std::min(x0 + 1, side - 1);
  const double ty = y - y0, tx = x - x0;
  auto at = [&](int yy, int xx) {
    return img[(static_cast<std::size_t>(yy) * side + xx) * kChannels + c];
  };
  return static_cast<float>((at(y0, x0) * (1 - tx) + at(y0, x1) * tx) * (1 - ty) +
                            (at(y1, x0) * (1 - tx) + at(y1, x1) * tx) * ty);
}

void apply_blend_boundary(Canvas& img, const FaceStyle& st, int side) {
  const auto& g = st.geo;
  const std::array<double, 3> tint = {st.skin[0] * 1.12, st.skin[1] * 0.78,
                                      st.skin[2] * 0.70};
  for (int y = g.seam_row - FaceGeometry::kSeamHalfWidth + 1;
       y < g.seam_row + FaceGeometry::kSeamHalfWidth; ++y) {
    if (y < 0 || y >= side) continue;
    const double band = 1.0 - std::abs(y - g.seam_row) /
                                  static_cast<double>(FaceGeometry::kSeamHalfWidth);
    for (int x = 0; x < side; ++x) {
      const double cover = ellipse_cover(x + 0.5, y + 0.5, g.cx, g.cy, g.rx + 1.5,
                                         g.ry + 1.5, 1.0);
      blend(img, side, y, x, tint, 0.85 * band * cover);
      add_grid(img, side, y, x, cover);
    }
  }
}

void apply_eye_asymmetry(Canvas& img, const FaceStyle& st, int side) {
  const auto& g = st.geo;
  const double ex = g.cx + g.eye_dx, ey = g.eye_y;
  const double radius = 6.5 * side / 64.0;
  const double zoom = 1.7;
  const Canvas src = img;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = x + 0.5 - ex, dy = y + 0.5 - ey;
      const double r = std::sqrt(dx * dx + dy * dy) / radius;
      if (r >= 1.0) continue;
      const double w = 1.0 - smoothstep(0.7, 1.0, r);
      for (int c = 0; c < 3; ++c) {
        const float scaled =
            sample_bilinear(src, side, ey + dy / zoom - 0.5, ex + dx / zoom - 0.5, c);
        float& p = img[(static_cast<std::size_t>(y) * side + x) * kChannels + c];
        p = static_cast<float>(p * (1 - w) + scaled * w);
      }
      add_grid(img, side, y, x, w);
    }
  }
}

void apply_texture_noise(Canvas& img, const FaceStyle& st, int side,
                         Rng& rng) {
  const auto& g = st.geo;
  std::normal_distribution<double> noise(0.0, 0.09);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double fx = x + 0.5, fy = y + 0.5;
      const double cheek =
          std::max(ellipse_cover(fx, fy, g.cx - 9.5 * side / 64.0, g.cy + 3 * side / 64.0,
                                 5 * side / 64.0, 5 * side / 64.0, 1.0),
                   ellipse_cover(fx, fy, g.cx + 9.5 * side / 64.0, g.cy + 3 * side / 64.0,
                                 5 * side / 64.0, 5 * side / 64.0, 1.0));
      if (cheek <= 0) continue;
      const double n = noise(rng) - 0.06;
      for (int c = 0; c < 3; ++c) {
        float& p = img[(static_cast<std::size_t>(y) * side + x) * kChannels + c];
        p = static_cast<float>(p + cheek * n);
      }
      add_grid(img, side, y, x, cheek);
    }
  }
}

void apply_mouth_warp(Canvas& img, const FaceStyle& st, int side) {
  const auto& g = st.geo;
  const double mx = g.cx, my = g.mouth_y;
  const double hw = 9.0 * side / 64.0, hh = 5.0 * side / 64.0;
  const Canvas src = img;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = (x + 0.5 - mx) / hw, dy = (y + 0.5 - my) / hh;
      const double r = std::sqrt(dx * dx + dy * dy);
      if (r >= 1.0) continue;
      const double w = 1.0 - smoothstep(0.6, 1.0, r);
      const double ox = 2.0 * std::sin(2 * std::numbers::pi * (y - my) / 5.0);
      const double oy = 2.2 * std::sin(2 * std::numbers::pi * (x - mx) / 7.0);
      for (int c = 0; c < 3; ++c) {
        const float warped = sample_bilinear(src, side, y + oy * w, x + ox * w, c);
        float& p = img[(static_cast<std::size_t>(y) * side + x) * kChannels + c];
        p = warped;
      }
      add_grid(img, side, y, x, w);
    }
  }
}

std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img-%05d", index);
  return buf;
}

}  // namespace

FaceGeometry face_geometry(std::uint64_t seed, int index, int side) {
  return make_style(seed, index, side).geo;
}

LabeledImage make_sample(std::uint64_t seed, int index, Label label,
                         ArtifactKind kind, int side) {
  if ((label == Label::kReal) != (kind == ArtifactKind::kNone))
    throw ContractError("artifact kind '" + std::string(to_string(kind)) +
                        "' inconsistent with label '" +
                        std::string(to_string(label)) + "'");
  if (side < 16) throw ContractError("image side must be at least 16");
  const FaceStyle st = make_style(seed, index, side);
  Canvas img = render_face(st, side);
  Rng rng(derive_seed(seed, "artifact", static_cast<std::uint64_t>(index)));
  switch (kind) {
    case ArtifactKind::kNone: break;
    case ArtifactKind::kBlendBoundary: apply_blend_boundary(img, st, side); break;
    case ArtifactKind::kEyeAsymmetry: apply_eye_asymmetry(img, st, side); break;
    case ArtifactKind::kTextureNoise: apply_texture_noise(img, st, side, rng); break;
    case ArtifactKind::kMouthWarp: apply_mouth_warp(img, st, side); break;
  }
  for (auto& v : img) v = std::clamp(v, 0.0f, 1.0f);
  LabeledImage out;
  out.id = sample_id(index);
  out.index = index;
  out.side = side;
  out.pixels = std::move(img);
  out.label = label;
  out.artifact = kind;
  return out;
}

std::vector<const LabeledImage*> SynthCorpus::in_split(Split s) const {
  std::vector<const LabeledImage*> out;
  for (const auto& img : samples)
    if (split.at(img.id) == s) out.push_back(&img);
  return out;
}

const LabeledImage* SynthCorpus::find(const std::string& id) const {
  for (const auto& img : samples)
    if (img.id == id) return &img;
  return nullptr;
}

SynthCorpus make_corpus(std::uint64_t seed, int n, int side) {
  if (n < 4) throw ContractError("corpus size must be at least 4, got " + std::to_string(n));
  SynthCorpus corpus;
  corpus.seed = seed;
  corpus.side = side;
  corpus.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int pair = i / 2;
    const bool fake = (i % 2) == 1;
    const ArtifactKind kind = fake ? kFakeKinds[pair % 4] : ArtifactKind::kNone;
    corpus.samples.push_back(
        make_sample(seed, i, fake ? Label::kFake : Label::kReal, kind, side));
    const std::uint64_t h =
        fnv1a64("pair:" + std::to_string(seed) + ":" + std::to_string(pair)) % 10;
    corpus.split[corpus.samples.back().id] =
        h < 8 ? Split::kTrain : (h == 8 ? Split::kVal : Split::kTest);
  }
  return corpus;
}

namespace {

nlohmann::json corpus_metadata(const SynthCorpus& corpus) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& img : corpus.samples) {
    samples.push_back({{"id", img.id},
                       {"index", img.index},
                       {"label", to_string(img.label)},
                       {"artifact_kind", to_string(img.artifact)},
                       {"split", to_string(corpus.split.at(img.id))},
                       {"file", img.id + ".png"}});
  }
  return {{"format", "dfx-corpus/1"},
          {"seed", corpus.seed},
          {"side", corpus.side},
          {"n", corpus.samples.size()},
          {"samples", std::move(samples)}};
}

}  // namespace

std::string corpus_bytes(const SynthCorpus& corpus) {
  std::string out = corpus_metadata(corpus).dump();
  for (const auto& img : corpus.samples)
    out.append(reinterpret_cast<const char*>(img.pixels.data()),
               img.pixels.size() * sizeof(float));
  return out;
}

void save_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "corpus.json", std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / "corpus.json").string());
    os << corpus_metadata(corpus).dump(1) << "\n";
  }
  for (const auto& img : corpus.samples)
    write_png(dir / (img.id + ".png"), RgbImage{img.side, img.side, img.pixels}, 16);
}

SynthCorpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream is(dir / "corpus.json");
  if (!is) throw IoError("no corpus.json in " + dir.string());
  const auto meta = nlohmann::json::parse(is);
  SynthCorpus corpus;
  corpus.seed = meta.at("seed").get<std::uint64_t>();
  corpus.side = meta.at("side").get<int>();
  for (const auto& s : meta.at("samples")) {
    LabeledImage img;
    img.id = s.at("id").get<std::string>();
    img.index = s.at("index").get<int>();
    img.side = corpus.side;
    img.label = parse_label(s.at("label").get<std::string>());
    img.artifact = parse_artifact_kind(s.at("artifact_kind").get<std::string>());
    const RgbImage rgb = read_png(dir / s.at("file").get<std::string>());
    if (rgb.width != corpus.side || rgb.height != corpus.side)
      throw ShapeError("image " + img.id + " is not " + std::to_string(corpus.side) +
                       " pixels square");
    img.pixels = rgb.pixels;
    corpus.split[img.id] = parse_split(s.at("split").get<std::string>());
    corpus.samples.push_back(std::move(img));
  }
  return corpus;
}

}  // namespace dfx::synthface

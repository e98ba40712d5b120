#include "venom/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "venom/error.hpp"
#include "venom/rng.hpp"

namespace venom {

Tensor Dataset::sample(int i) const {
  if (i < 0 || i >= size()) throw Error("dataset: sample index out of range");
  Tensor t({channels(), height(), width()});
  const std::size_t n = t.numel();
  std::copy_n(images.data.begin() + static_cast<std::size_t>(i) * n, n, t.data.begin());
  return t;
}

Tensor Dataset::gather(const std::vector<int>& indices, std::vector<int>* out_labels) const {
  Tensor t({static_cast<int>(indices.size()), channels(), height(), width()});
  const std::size_t n = static_cast<std::size_t>(channels()) * height() * width();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= size()) throw Error("dataset: sample index out of range");
    std::copy_n(images.data.begin() + static_cast<std::size_t>(i) * n, n,
                t.data.begin() + r * n);
  }
  if (out_labels) {
    out_labels->clear();
    for (int i : indices) out_labels->push_back(labels[i]);
  }
  return t;
}

std::vector<int> Dataset::indices_of_class(int label) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (labels[i] == label) out.push_back(i);
  return out;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.images = gather(indices, &out.labels);
  return out;
}

void Dataset::validate() const {
  if (images.shape.size() != 4) throw ShapeError("dataset: images must be (N,C,H,W)");
  if (images.numel() != TensorT<float>::numel_of(images.shape))
    throw ShapeError("dataset: data length does not match shape");
  if (static_cast<int>(labels.size()) != size())
    throw ShapeError("dataset: label count does not match sample count");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw Error("dataset: label " + std::to_string(y) + " out of range");
}

// ---------------------------------------------------------------------------
// synthetic shapes

namespace {

// Paints one class-dependent figure onto a (H,W) canvas. 16 figure kinds.
void paint_shape(std::vector<float>& canvas, int h, int w, int shape_id, float amp,
                 int cy, int cx, int r) {
  auto put = [&](int y, int x) {
    if (y >= 0 && y < h && x >= 0 && x < w) {
      float& p = canvas[static_cast<std::size_t>(y) * w + x];
      p = std::max(p, amp);
    }
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dy = y - cy, dx = x - cx;
      const double dist = std::sqrt(double(dy) * dy + double(dx) * dx);
      const int box = std::max(std::abs(dy), std::abs(dx));
      bool on = false;
      switch (shape_id) {
        case 0: on = dist <= r; break;                            // disk
        case 1: on = std::abs(dist - r) <= 0.8; break;            // ring
        case 2:                                                   // plus
          on = (std::abs(dy) <= 1 && std::abs(dx) <= r) ||
               (std::abs(dx) <= 1 && std::abs(dy) <= r);
          break;
        case 3:                                                   // X
          on = box <= r && (std::abs(dy - dx) <= 1 || std::abs(dy + dx) <= 1);
          break;
        case 4: on = box <= (r * 4) / 5; break;                   // square
        case 5: on = std::abs(box - (r * 4) / 5) <= 0; break;     // frame
        case 6: on = std::abs(dy) <= 1 && std::abs(dx) <= r + 1; break;  // h-bar
        case 7: on = std::abs(dx) <= 1 && std::abs(dy) <= r + 1; break;  // v-bar
        case 8: on = std::abs(dy - dx) <= 1; break;               // diagonal
        case 9: on = std::abs(dy + dx) <= 1; break;               // anti-diagonal
        case 10:                                                  // two h-bars
          on = std::abs(dx) <= r && (std::abs(dy + r - 1) <= 0 || std::abs(dy - r + 1) <= 0);
          break;
        case 11:                                                  // two v-bars
          on = std::abs(dy) <= r && (std::abs(dx + r - 1) <= 0 || std::abs(dx - r + 1) <= 0);
          break;
        case 12:                                                  // checker
          on = box <= r && (((y / 2) + (x / 2)) % 2 == 0);
          break;
        case 13:                                                  // T
          on = (std::abs(dy + r - 1) <= 0 && std::abs(dx) <= r) ||
               (std::abs(dx) <= 0 && dy >= -r + 1 && dy <= r);
          break;
        case 14:                                                  // L
          on = (std::abs(dx + r - 1) <= 0 && std::abs(dy) <= r) ||
               (std::abs(dy - r + 1) <= 0 && dx >= -r + 1 && dx <= r);
          break;
        case 15:                                                  // dot grid
          on = box <= r && (dy % 3 == 0) && (dx % 3 == 0);
          break;
        default: break;
      }
      if (on) put(y, x);
    }
  }
}

}  // namespace

Dataset generate_synthetic_dataset(int num_classes, int per_class, int image_size,
                                   std::uint64_t seed, int channels) {
  if (num_classes < 2 || num_classes > 16)
    throw Error("synthetic dataset: num_classes must be in [2,16]");
  if (image_size < 16) throw Error("synthetic dataset: image_size must be >= 16");
  if (per_class < 10) throw Error("synthetic dataset: per_class < 10, too small to train");
  if (channels != 1 && channels != 3)
    throw Error("synthetic dataset: channels must be 1 or 3");

  const int n = num_classes * per_class;
  const int h = image_size, w = image_size;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.images = Tensor({n, channels, h, w});
  ds.labels.resize(n);

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<float> canvas(plane);
  for (int i = 0; i < n; ++i) {
    const int label = i % num_classes;
    ds.labels[i] = label;
    Rng rng(sub_seed(seed, static_cast<std::uint64_t>(i)));

    const int cy = h / 2 + rng.uniform_int(-2, 2);
    const int cx = w / 2 + rng.uniform_int(-2, 2);
    const int r = rng.uniform_int(3, std::min(5, h / 2 - 3));
    const float amp = static_cast<float>(rng.uniform(0.75, 1.0));

    for (int c = 0; c < channels; ++c) {
      for (auto& p : canvas) p = static_cast<float>(rng.uniform(0.05, 0.22));
      const float amp_c = c == 0 ? amp : amp * static_cast<float>(rng.uniform(0.7, 1.0));
      paint_shape(canvas, h, w, label, amp_c, cy, cx, r);
      float* dst = ds.images.data.data() + (static_cast<std::size_t>(i) * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const float noisy = canvas[p] + static_cast<float>(rng.uniform(-0.03, 0.03));
        dst[p] = std::clamp(noisy, 0.0f, 1.0f);
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// binary I/O

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

struct Reader {
  std::ifstream is;
  std::string path;

  explicit Reader(const std::string& p) : is(p, std::ios::binary), path(p) {
    if (!is) throw IoError("cannot open '" + p + "'");
  }

  void bytes(void* dst, std::size_t n) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw IoError("'" + path + "': truncated file");
  }

  std::uint16_t u16() {
    unsigned char b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
};

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path + "'");
  os.write("VNDS", 4);
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(ds.size()));
  put_u16(os, static_cast<std::uint16_t>(ds.channels()));
  put_u16(os, static_cast<std::uint16_t>(ds.height()));
  put_u16(os, static_cast<std::uint16_t>(ds.width()));
  put_u16(os, static_cast<std::uint16_t>(ds.num_classes));
  for (int y : ds.labels) put_u16(os, static_cast<std::uint16_t>(y));
  os.write(reinterpret_cast<const char*>(ds.images.data.data()),
           static_cast<std::streamsize>(ds.images.numel() * 4));
  if (!os) throw IoError("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "VNDS", 4) != 0)
    throw IoError("'" + path + "': bad magic, not a dataset file");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw IoError("'" + path + "': unsupported dataset version " + std::to_string(version));
  const int n = static_cast<int>(r.u32());
  const int c = r.u16(), h = r.u16(), w = r.u16();
  Dataset ds;
  ds.num_classes = r.u16();
  if (n <= 0 || c <= 0 || h <= 0 || w <= 0 || ds.num_classes <= 0)
    throw IoError("'" + path + "': invalid header");
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = r.u16();
  ds.images = Tensor({n, c, h, w});
  r.bytes(ds.images.data.data(), ds.images.numel() * 4);
  ds.validate();
  return ds;
}

}  // namespace venom

// SPDX-License-Identifier: Apache-2.0
//
// Stand-in for an external segmentation model, used to exercise the adapter
// backend. Usage: fake_segmenter <mode> <image.png> <out_dir>
//
//   bands      five horizontal bands with scores 0.1 .. 0.5 (top band lowest)
//   fail       exits with status 3
//   garbage    index.jsonl holds a line that is not JSON
//   badscore   one mask with score 1.5
//   wrongsize  one mask half the image height
//   noindex    writes masks but no index
#include <cstdio>
#include <fstream>
#include <string>

#include "lamsc/image.hpp"
#include "lamsc/skb.hpp"

using namespace lamsc;

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: fake_segmenter <mode> <image.png> <out_dir>\n");
    return 2;
  }
  const std::string mode = argv[1], out = argv[3];
  if (mode == "fail") return 3;
  const ImageSample img = io::load_image(argv[2]);
  const int h = img.height(), w = img.width();
  std::ofstream index(out + "/index.jsonl");
  if (mode == "garbage") {
    index << "{\"mask_path\": \"m0.png\", \"score\": \n";
    return 0;
  }
  if (mode == "badscore" || mode == "wrongsize") {
    const auto m = skb::SegmentMask::filled(mode == "wrongsize" ? h / 2 : h, w, 1);
    skb::save_mask_png(out + "/m0.png", m);
    index << "{\"mask_path\": \"m0.png\", \"label\": \"thing\", \"score\": " << (mode == "badscore" ? 1.5 : 0.5)
          << "}\n";
    return 0;
  }
  if (mode != "bands" && mode != "noindex") {
    std::fprintf(stderr, "unknown mode %s\n", mode.c_str());
    return 2;
  }
  for (int b = 0; b < 5; ++b) {
    auto m = skb::SegmentMask::filled(h, w, 0);
    for (int y = b * h / 5; y < (b + 1) * h / 5; ++y)
      for (int x = 0; x < w; ++x) m.bits[static_cast<std::size_t>(y) * w + x] = 1;
    const std::string name = "band" + std::to_string(b) + ".png";
    skb::save_mask_png(out + "/" + name, m);
    if (mode == "bands")
      index << "{\"mask_path\": \"" << name << "\", \"label\": \"band" << b << "\", \"score\": " << 0.1 * (b + 1)
            << "}\n";
  }
  if (mode == "noindex") {
    index.close();
    std::remove((out + "/index.jsonl").c_str());
  }
  return 0;
}

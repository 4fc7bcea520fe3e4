#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cin/conv.hpp"
#include "cin/image_io.hpp"

namespace cin {

// In-memory image set: every file center-cropped square, bilinearly resized
// to size x size, normalized to [0,1]. Unreadable files are skipped with a
// warning; an empty result is an error.
struct Dataset {
  std::vector<TensorF> images;  // each [1,3,S,S]
  std::vector<std::string> names;
  int size = 0;

  static TensorF standardize(const TensorF& t, int size) {
    const Index H = t.dim(2), W = t.dim(3);
    TensorF square = t;
    if (H != W) {
      const Index side = std::min(H, W);
      square = crop2d(t, (H - side) / 2, (W - side) / 2, side, side);
    }
    if (square.dim(2) != size) square = bilinear_resize(square, size, size);
    return square;
  }

  static Dataset load(const std::string& dir, int size) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), "dataset: '" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string ext = e.path().extension().string();
      if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".pgm")
        files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());

    Dataset ds;
    ds.size = size;
    for (const auto& f : files) {
      try {
        ds.images.push_back(standardize(image_to_tensor(read_image(f)), size));
        ds.names.push_back(fs::path(f).filename().string());
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping '" << f << "': " << e.what() << "\n";
      }
    }
    require(!ds.images.empty(),
            "dataset: no readable images in '" + dir + "'");
    return ds;
  }

  Index count() const { return static_cast<Index>(images.size()); }

  // Stack selected images into one [B,3,S,S] batch.
  TensorF batch(const std::vector<Index>& idx) const {
    require(!idx.empty(), "dataset batch: empty index list");
    const Index per = images[0].size();
    ArrayX<float> a(static_cast<Index>(idx.size()) * per);
    for (size_t k = 0; k < idx.size(); ++k)
      a.segment(static_cast<Index>(k) * per, per) = images[idx[k]].array();
    return TensorF::from_array(
        {static_cast<Index>(idx.size()), 3, size, size}, std::move(a), false);
  }
};

}  // namespace cin

#pragma once

#include <png.h>

#include <fstream>
#include <string>

#include "seareg/colour/camera.hpp"
#include "seareg/io/trajectory_io.hpp"

namespace seareg::io {

/// Binary PPM (P6, maxval 255).
inline Image read_ppm(std::istream& in) {
  auto token = [&in]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') std::getline(in, t);
    if (!(in >> t)) throw Error(Errc::Parse, "truncated PPM header");
    return t;
  };
  if (token() != "P6") throw Error(Errc::Parse, "only binary PPM (P6) is supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw Error(Errc::Parse, "bad PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(Errc::Parse, "unsupported PPM dimensions or maxval");
  in.get();
  Image img(w, h);
  if (!in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size())))
    throw Error(Errc::Parse, "truncated PPM pixel data");
  return img;
}

inline void write_ppm(std::ostream& out, const Image& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

namespace detail {

inline bool endsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

inline Image read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw Error(Errc::Io, "cannot read " + path + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw Error(Errc::Parse, "bad PNG " + path + ": " + msg);
  }
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.rgb.data(), 0, nullptr))
    throw Error(Errc::Io, "cannot write " + path + ": " + png.message);
}

/// Dispatches on extension: .png, otherwise PPM.
inline Image read_image(const std::string& path) {
  if (detail::endsWith(path, ".png") || detail::endsWith(path, ".PNG")) return read_png(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_ppm(in);
}

inline void write_image(const std::string& path, const Image& img) {
  if (detail::endsWith(path, ".png") || detail::endsWith(path, ".PNG")) return write_png(path, img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_ppm(out, img);
}

/// Sidecar path for an image: same stem with a `.pose.csv` suffix.
inline std::string pose_sidecar_path(const std::string& image_path) {
  const auto dot = image_path.find_last_of('.');
  const auto slash = image_path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? image_path.substr(0, dot) : image_path) + ".pose.csv";
}

/// Loads an image plus its single-row pose sidecar (submap-from-body).
inline PosedImage read_posed_image(const std::string& image_path) {
  std::ifstream in(pose_sidecar_path(image_path));
  if (!in) throw Error(Errc::Io, "missing pose sidecar for " + image_path);
  const auto poses = read_pose_csv(in);
  if (poses.size() != 1) throw Error(Errc::Parse, "pose sidecar must hold exactly one row");
  return {read_image(image_path), poses.front().world_from_body};
}

inline void write_posed_image(const std::string& image_path, const PosedImage& pi, double t = 0.0) {
  write_image(image_path, pi.image);
  std::ofstream out(pose_sidecar_path(image_path));
  if (!out) throw Error(Errc::Io, "cannot write sidecar for " + image_path);
  write_pose_csv(out, {{t, pi.submap_from_body}});
}

}  // namespace seareg::io

#include "graspfit/image.hpp"

#include <cstdio>
#include <fstream>

#include "graspfit/errors.hpp"

namespace graspfit {

namespace {

struct PgmHeader {
  int width = 0, height = 0, maxval = 0;
};

PgmHeader readPgmHeader(std::ifstream& in, const std::string& path) {
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(path + ": not a binary PGM (P5) file");
  PgmHeader h;
  int got = 0;
  while (got < 3) {
    int c = in.peek();
    if (c == EOF) throw ParseError(path + ": truncated PGM header");
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    int v;
    if (!(in >> v)) throw ParseError(path + ": bad PGM header token");
    if (got == 0) h.width = v;
    if (got == 1) h.height = v;
    if (got == 2) h.maxval = v;
    ++got;
  }
  in.get();  // single whitespace after maxval
  if (h.width <= 0 || h.height <= 0) throw ParseError(path + ": bad PGM dimensions");
  return h;
}

}  // namespace

void savePgm8(const ImageU8& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image: " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size()));
}

void savePgm16(const ImageU16& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image: " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width()) * 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::uint16_t v = img.at(x, y);
      row[2 * x] = static_cast<unsigned char>(v >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

ImageU8 loadPgm8(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open image: " + path);
  const PgmHeader h = readPgmHeader(in, path);
  if (h.maxval > 255) throw ParseError(path + ": expected 8-bit PGM");
  ImageU8 img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.data().data()),
          static_cast<std::streamsize>(img.data().size()));
  if (!in) throw ParseError(path + ": truncated PGM data");
  return img;
}

ImageU16 loadPgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open image: " + path);
  const PgmHeader h = readPgmHeader(in, path);
  if (h.maxval <= 255) throw ParseError(path + ": expected 16-bit PGM");
  ImageU16 img(h.width, h.height);
  std::vector<unsigned char> row(static_cast<size_t>(h.width) * 2);
  for (int y = 0; y < h.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw ParseError(path + ": truncated PGM data");
    for (int x = 0; x < h.width; ++x) {
      img.at(x, y) = static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
    }
  }
  return img;
}

}  // namespace graspfit

#include "gibbsddrm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace gibbsddrm::io {

std::string format_double(double v) {
  if (!std::isfinite(v)) {
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  size_t b = text.find_first_not_of(" \t\r");
  size_t e = text.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw std::invalid_argument("empty number");
  const std::string s = text.substr(b, e - b + 1);
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path, "cannot create directory: " + ec.message());
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError(path, "cannot open for reading");
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void write_csv(const fs::path& path, const Vector& values) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < values.size(); ++i) out << format_double(values(i)) << '\n';
  finish(out, path);
}

Vector read_csv(const fs::path& path) {
  const auto lines = lines_of(path);
  Vector v(static_cast<Index>(lines.size()));
  for (size_t i = 0; i < lines.size(); ++i) {
    try {
      v(static_cast<Index>(i)) = parse_double(lines[i]);
    } catch (const std::invalid_argument& e) {
      throw IoError(path, "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return v;
}

void write_csv_complex(const fs::path& path, const CVector& values) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < values.size(); ++i) {
    out << format_double(values(i).real()) << ','
        << format_double(values(i).imag()) << '\n';
  }
  finish(out, path);
}

CVector read_csv_complex(const fs::path& path) {
  const auto lines = lines_of(path);
  CVector v(static_cast<Index>(lines.size()));
  for (size_t i = 0; i < lines.size(); ++i) {
    const size_t comma = lines[i].find(',');
    if (comma == std::string::npos) {
      throw IoError(path, "line " + std::to_string(i + 1) + ": expected re,im");
    }
    try {
      v(static_cast<Index>(i)) = Complex(parse_double(lines[i].substr(0, comma)),
                                         parse_double(lines[i].substr(comma + 1)));
    } catch (const std::invalid_argument& e) {
      throw IoError(path, "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return v;
}

double quantize_pixel(double v) {
  const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  return std::round(c * 255.0) / 255.0;
}

void write_pgm(const fs::path& path, const Image& image) {
  if (image.height < 1 || image.width < 1 ||
      image.pixels.size() != image.height * image.width) {
    throw IoError(path, "image shape does not match pixel count");
  }
  std::ofstream out = open_out(path, true);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string bytes(static_cast<size_t>(image.pixels.size()), '\0');
  for (Index i = 0; i < image.pixels.size(); ++i) {
    bytes[static_cast<size_t>(i)] = static_cast<char>(
        static_cast<unsigned char>(std::lround(quantize_pixel(image.pixels(i)) * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in, const fs::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError(path, "truncated PGM header");
  return tok;
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  if (pgm_token(in, path) != "P5") throw IoError(path, "not a binary PGM (P5)");
  Image img;
  try {
    img.width = std::stol(pgm_token(in, path));
    img.height = std::stol(pgm_token(in, path));
    if (std::stol(pgm_token(in, path)) != 255) {
      throw IoError(path, "only maxval 255 is supported");
    }
  } catch (const std::logic_error&) {
    throw IoError(path, "malformed PGM header");
  }
  if (img.width < 1 || img.height < 1) throw IoError(path, "empty PGM");
  std::string bytes(static_cast<size_t>(img.width * img.height), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(path, "truncated PGM pixel data");
  }
  img.pixels.resize(img.width * img.height);
  for (size_t i = 0; i < bytes.size(); ++i) {
    img.pixels(static_cast<Index>(i)) =
        static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
  }
  return img;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace gibbsddrm::io

#ifndef GIBBSDDRM_IO_HPP_
#define GIBBSDDRM_IO_HPP_

#include "gibbsddrm/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace gibbsddrm::io {

namespace fs = std::filesystem;

// I/O failure; the message always carries the path.
class IoError : public std::runtime_error {
 public:
  IoError(const fs::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text);

// One value per line, "\n" terminated.
void write_csv(const fs::path& path, const Vector& values);
Vector read_csv(const fs::path& path);
// One "re,im" pair per line.
void write_csv_complex(const fs::path& path, const CVector& values);
CVector read_csv_complex(const fs::path& path);

struct Image {
  Index height = 0;
  Index width = 0;
  Vector pixels;  // row-major, in [0, 1]
};

// Binary P5, maxval 255. Pixels are clamped to [0, 1] and rounded to the
// nearest of 256 levels.
void write_pgm(const fs::path& path, const Image& image);
Image read_pgm(const fs::path& path);
// The value a pixel takes after a PGM round trip.
double quantize_pixel(double v);

void write_json(const fs::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace gibbsddrm::io

#endif  // GIBBSDDRM_IO_HPP_

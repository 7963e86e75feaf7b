#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthedge/image.hpp"

namespace depthedge {

/// Portable FloatMap. "Pf" holds one channel, "PF" three; rows are stored
/// bottom-to-top and a negative scale marks little-endian samples. The
/// writer always emits little-endian with scale -1.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& img);
std::string encode_pfm(const Image& img);
Image decode_pfm(const std::string& bytes, const std::string& origin = "<memory>");

/// Binary P6 (3 channel) / P5 (1 channel) with maxval 255. Samples are
/// mapped between [0,1] floats and bytes by x*255 rounded and clamped.
Image read_pnm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& rgb);
void write_pgm(const std::filesystem::path& path, const Image& gray);

/// 16-bit P5 (maxval 65535, big-endian) used for integer label maps.
void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& values);
std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& width, int& height);

/// Write through a sibling temporary file and rename into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace depthedge

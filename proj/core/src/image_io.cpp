#include "depthedge/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace depthedge {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw io_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

// Reads whitespace-separated header tokens; a single whitespace byte ends the header.
class HeaderReader {
public:
    HeaderReader(const std::string& bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    std::string token(const char* field) {
        skip_space_and_comments();
        std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) throw parse_error(origin_ + ": missing header field '" + field + "'");
        return bytes_.substr(start, pos_ - start);
    }

    long integer(const char* field) {
        const std::string t = token(field);
        char* end = nullptr;
        const long v = std::strtol(t.c_str(), &end, 10);
        if (*end != '\0') throw parse_error(origin_ + ": header field '" + field + "' is not an integer: " + t);
        return v;
    }

    double real(const char* field) {
        const std::string t = token(field);
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (*end != '\0' || !std::isfinite(v)) {
            throw parse_error(origin_ + ": header field '" + field + "' is not a number: " + t);
        }
        return v;
    }

    std::size_t end_of_header() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw parse_error(origin_ + ": header not terminated by whitespace");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

void check_dims(long w, long h, const std::string& origin) {
    if (w < 1 || h < 1 || w > (1 << 16) || h > (1 << 16)) {
        throw parse_error(origin + ": implausible image size " + std::to_string(w) + "x" + std::to_string(h));
    }
}

}  // namespace

std::string encode_pfm(const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw shape_error("PFM stores 1 or 3 channels, got " + std::to_string(img.channels()));
    }
    std::string out = (img.channels() == 3 ? "PF\n" : "Pf\n");
    out += std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n-1.0\n";
    const std::size_t row = static_cast<std::size_t>(img.width()) * img.channels();
    const std::size_t header = out.size();
    out.resize(header + row * img.height() * sizeof(float));
    char* dst = out.data() + header;
    for (int y = img.height() - 1; y >= 0; --y) {
        const float* src = img.data().data() + static_cast<std::size_t>(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(src[i]);
            if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
            std::memcpy(dst, &bits, 4);
            dst += 4;
        }
    }
    return out;
}

Image decode_pfm(const std::string& bytes, const std::string& origin) {
    HeaderReader hdr(bytes, origin);
    const std::string magic = hdr.token("magic");
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw parse_error(origin + ": bad PFM magic '" + magic + "'");
    const long w = hdr.integer("width");
    const long h = hdr.integer("height");
    check_dims(w, h, origin);
    const double scale = hdr.real("scale");
    if (scale == 0.0) throw parse_error(origin + ": PFM scale must be nonzero");
    const bool little = scale < 0.0;
    const std::size_t start = hdr.end_of_header();
    const std::size_t row = static_cast<std::size_t>(w) * channels;
    const std::size_t need = row * h * 4;
    if (bytes.size() < start + need) {
        throw parse_error(origin + ": PFM payload truncated (" + std::to_string(bytes.size() - start) +
                          " of " + std::to_string(need) + " bytes)");
    }
    const bool swap = little != (std::endian::native == std::endian::little);
    std::vector<float> data(row * h);
    const char* src = bytes.data() + start;
    for (long y = h - 1; y >= 0; --y) {
        float* dst = data.data() + static_cast<std::size_t>(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, src, 4);
            src += 4;
            if (swap) bits = byteswap32(bits);
            dst[i] = std::bit_cast<float>(bits);
        }
    }
    return Image(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

Image read_pfm(const fs::path& path) { return decode_pfm(read_file(path), path.string()); }

void write_pfm(const fs::path& path, const Image& img) { write_file_atomic(path, encode_pfm(img)); }

Image read_pnm(const fs::path& path) {
    const std::string bytes = read_file(path);
    const std::string origin = path.string();
    HeaderReader hdr(bytes, origin);
    const std::string magic = hdr.token("magic");
    int channels = 0;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw parse_error(origin + ": expected P5 or P6, got '" + magic + "'");
    const long w = hdr.integer("width");
    const long h = hdr.integer("height");
    check_dims(w, h, origin);
    const long maxval = hdr.integer("maxval");
    if (maxval < 1 || maxval > 65535) throw parse_error(origin + ": maxval out of range");
    const std::size_t start = hdr.end_of_header();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(w) * h * channels;
    if (bytes.size() < start + count * bps) throw parse_error(origin + ": pixel data truncated");
    std::vector<float> data(count);
    const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = bps == 2 ? (src[2 * i] << 8) | src[2 * i + 1] : src[i];
        data[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
    return Image(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

namespace {

std::string encode_pnm8(const Image& img, const char* magic) {
    std::string out = std::string(magic) + "\n" + std::to_string(img.width()) + " " +
                      std::to_string(img.height()) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img.data()[i]), 0.0, 1.0);
        out[header + i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    return out;
}

}  // namespace

void write_ppm(const fs::path& path, const Image& rgb) {
    if (rgb.channels() != 3) throw shape_error("PPM needs a 3-channel image");
    write_file_atomic(path, encode_pnm8(rgb, "P6"));
}

void write_pgm(const fs::path& path, const Image& gray) {
    require_single_channel(gray, "write_pgm");
    write_file_atomic(path, encode_pnm8(gray, "P5"));
}

void write_pgm16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& values) {
    if (values.size() != static_cast<std::size_t>(width) * height) {
        throw shape_error("write_pgm16: value count does not match dimensions");
    }
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + 2 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[header + 2 * i] = static_cast<char>(values[i] >> 8);
        out[header + 2 * i + 1] = static_cast<char>(values[i] & 0xFF);
    }
    write_file_atomic(path, out);
}

std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height) {
    const std::string bytes = read_file(path);
    const std::string origin = path.string();
    HeaderReader hdr(bytes, origin);
    if (hdr.token("magic") != "P5") throw parse_error(origin + ": expected P5");
    const long w = hdr.integer("width");
    const long h = hdr.integer("height");
    check_dims(w, h, origin);
    if (hdr.integer("maxval") != 65535) throw parse_error(origin + ": expected 16-bit maxval 65535");
    const std::size_t start = hdr.end_of_header();
    const std::size_t count = static_cast<std::size_t>(w) * h;
    if (bytes.size() < start + 2 * count) throw parse_error(origin + ": pixel data truncated");
    std::vector<std::uint16_t> out(count);
    const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<std::uint16_t>((src[2 * i] << 8) | src[2 * i + 1]);
    width = static_cast<int>(w);
    height = static_cast<int>(h);
    return out;
}

}  // namespace depthedge

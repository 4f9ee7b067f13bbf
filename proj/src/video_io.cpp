#include "veil/video/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace veil::video {

namespace {

struct FileHandle {
    FILE* f = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
};

void put_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const char* what) {
    uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError(std::string("truncated ") + what);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is, const char* what) {
    uint32_t bits = get_u32(is, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

Frame load_png(const std::string& file) {
    FileHandle fh(file, "rb");
    if (!fh.f) throw IoError("cannot open PNG: " + file);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng allocation failed");
    }
    std::vector<uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG decode failed: " + file);
    }
    png_init_io(png, fh.f);
    png_read_info(png, info);
    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG must decode to 1 or 3 channels: " + file);
    }
    pixels.resize(size_t(h) * w * size_t(channels));
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + size_t(y) * w * size_t(channels);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Frame f({channels, int(h), int(w)});
    for (int c = 0; c < channels; ++c)
        for (png_uint_32 y = 0; y < h; ++y)
            for (png_uint_32 x = 0; x < w; ++x)
                f.at3(c, int(y), int(x)) =
                    from_u8(pixels[(size_t(y) * w + x) * size_t(channels) + size_t(c)]);
    return f;
}

void save_png(const Frame& frame, const std::string& file) {
    validate_frame(frame);
    const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    FileHandle fh(file, "wb");
    if (!fh.f) throw IoError("cannot open PNG for write: " + file);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw IoError("libpng allocation failed");
    }
    std::vector<uint8_t> pixels(size_t(H) * W * size_t(C));
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + file);
    }
    png_init_io(png, fh.f);
    png_set_IHDR(png, info, png_uint_32(W), png_uint_32(H), 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                pixels[(size_t(y) * W + x) * size_t(C) + size_t(c)] = to_u8(frame.at3(c, y, x));
    for (int y = 0; y < H; ++y) rows[size_t(y)] = pixels.data() + size_t(y) * W * size_t(C);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor load_audio_matrix(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot open audio matrix: " + file);
    const uint32_t rows = get_u32(is, "audio header");
    const uint32_t cols = get_u32(is, "audio header");
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 16))
        throw FormatError("implausible audio matrix dimensions in " + file);
    Tensor a({int(rows), int(cols)});
    for (auto& v : a.data) v = get_f32(is, "audio data");
    return a;
}

void save_audio_matrix(const Tensor& audio, const std::string& file) {
    require(audio.ndim() == 2, "audio matrix must be 2D");
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open audio matrix for write: " + file);
    put_u32(os, uint32_t(audio.dim(0)));
    put_u32(os, uint32_t(audio.dim(1)));
    for (float v : audio.data) put_f32(os, v);
    if (!os) throw IoError("audio matrix write failed: " + file);
}

namespace {

VideoClip load_clip_raw(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot open clip: " + file);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kRawClipMagic, 4) != 0)
        throw FormatError("bad raw clip magic in " + file);
    const uint32_t T = get_u32(is, "raw clip header");
    const uint32_t C = get_u32(is, "raw clip header");
    const uint32_t H = get_u32(is, "raw clip header");
    const uint32_t W = get_u32(is, "raw clip header");
    if (T == 0 || T > (1u << 20)) throw FormatError("implausible frame count in " + file);
    VideoClip clip;
    clip.frames.reserve(T);
    for (uint32_t t = 0; t < T; ++t) {
        Frame f({int(C), int(H), int(W)});
        for (auto& v : f.data) v = get_f32(is, "raw clip data");
        clip.frames.push_back(std::move(f));
    }
    validate_clip(clip);
    return clip;
}

VideoClip load_clip_dir(const std::string& dir) {
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw FormatError("missing manifest.json in " + dir);
    json m;
    try {
        mf >> m;
    } catch (const json::exception& e) {
        throw FormatError("manifest parse error in " + dir + ": " + e.what());
    }
    try {
        VideoClip clip;
        clip.fps = m.at("fps").get<double>();
        const int T = m.at("T").get<int>();
        const int C = m.at("C").get<int>();
        const int H = m.at("H").get<int>();
        const int W = m.at("W").get<int>();
        const auto files = m.at("frame_files").get<std::vector<std::string>>();
        if (int(files.size()) != T)
            throw FormatError("manifest frame count does not match frame_files in " + dir);
        for (const auto& name : files) {
            const fs::path p = root / name;
            if (!fs::exists(p)) throw FormatError("missing frame file: " + p.string());
            Frame f = load_png(p.string());
            if (f.dim(0) != C || f.dim(1) != H || f.dim(2) != W)
                throw ValidationError("frame shape mismatch in " + p.string());
            clip.frames.push_back(std::move(f));
        }
        if (m.contains("audio_file")) {
            clip.audio = load_audio_matrix((root / m.at("audio_file").get<std::string>()).string());
        }
        validate_clip(clip);
        return clip;
    } catch (const json::exception& e) {
        throw FormatError("manifest field error in " + dir + ": " + e.what());
    }
}

}  // namespace

VideoClip load_clip(const std::string& path) {
    if (fs::is_directory(path)) return load_clip_dir(path);
    if (!fs::exists(path)) throw IoError("no such clip: " + path);
    return load_clip_raw(path);
}

void save_clip_raw(const VideoClip& clip, const std::string& file) {
    validate_clip(clip);
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open clip for write: " + file);
    os.write(kRawClipMagic, 4);
    put_u32(os, uint32_t(clip.T()));
    put_u32(os, uint32_t(clip.C()));
    put_u32(os, uint32_t(clip.H()));
    put_u32(os, uint32_t(clip.W()));
    for (const Frame& f : clip.frames)
        for (float v : f.data) put_f32(os, v);
    if (!os) throw IoError("clip write failed: " + file);
}

void save_clip_dir(const VideoClip& clip, const std::string& dir) {
    validate_clip(clip);
    fs::create_directories(dir);
    json m;
    m["fps"] = clip.fps;
    m["T"] = clip.T();
    m["C"] = clip.C();
    m["H"] = clip.H();
    m["W"] = clip.W();
    std::vector<std::string> files;
    for (int t = 0; t < clip.T(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.png", t);
        files.push_back(name);
        save_png(clip.frames[size_t(t)], (fs::path(dir) / name).string());
    }
    m["frame_files"] = files;
    if (clip.audio.numel() > 0) {
        m["audio_file"] = "audio.bin";
        save_audio_matrix(clip.audio, (fs::path(dir) / "audio.bin").string());
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw IoError("cannot write manifest in " + dir);
    os << m.dump(2) << "\n";
}

void save_clip(const VideoClip& clip, const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".cve")
        save_clip_raw(clip, path);
    else
        save_clip_dir(clip, path);
}

}  // namespace veil::video

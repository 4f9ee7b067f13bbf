// Clip container I/O.
// Directory form: manifest.json {fps,T,C,H,W,frame_files[],audio_file?} plus
// 8-bit PNG frames and an optional float32 audio matrix file.
// Raw form: magic "CVE1", uint32 T,C,H,W little-endian, float32 [T,C,H,W].
#pragma once

#include <string>

#include "veil/video/clip.hpp"

namespace veil::video {

inline constexpr char kRawClipMagic[4] = {'C', 'V', 'E', '1'};

// Auto-detects directory vs raw file.
VideoClip load_clip(const std::string& path);

// Writes the directory form (PNG frames, lossy to 1/255 per value).
void save_clip_dir(const VideoClip& clip, const std::string& dir);

// Writes the raw form (bit-exact round trip).
void save_clip_raw(const VideoClip& clip, const std::string& file);

// Directory form unless the path ends in ".cve", which selects raw.
void save_clip(const VideoClip& clip, const std::string& path);

// Single-image PNG helpers; frame is [C,H,W] with C 1 or 3.
Frame load_png(const std::string& file);
void save_png(const Frame& frame, const std::string& file);

// Audio matrix file: uint32 rows, cols little-endian, then float32 data.
Tensor load_audio_matrix(const std::string& file);
void save_audio_matrix(const Tensor& audio, const std::string& file);

}  // namespace veil::video

#pragma once

#include <filesystem>

#include "voleval/voxel_grid.hpp"

namespace voleval {

// NIfTI-1 single-file I/O (".nii" or gzip-compressed ".nii.gz").
//
// Header fields honored bit-exactly: sizeof_hdr (=348), dim[0..7],
// datatype (2=uint8, 4=int16, 16=float32), bitpix, pixdim[0..7],
// vox_offset, scl_slope, scl_inter, magic ("n+1\0"). Files whose first
// four bytes decode to 348 big-endian are byte-swapped on read. Gzip is
// detected by the 0x1F 0x8B prefix regardless of extension.
//
// scl_slope == 0 is treated as identity scaling; any other non-identity
// (slope, inter) pair converts the loaded data to float32.
VoxelGrid load_volume(const std::filesystem::path& path);

// Writes little-endian NIfTI-1 with vox_offset 352. A ".gz" suffix
// selects gzip compression (with a fixed header, so output bytes are
// reproducible). load_volume inverts save_volume up to float32 rounding
// of spacing and origin.
void save_volume(const VoxelGrid& grid, const std::filesystem::path& path);

}  // namespace voleval

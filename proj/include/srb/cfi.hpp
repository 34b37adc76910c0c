#pragma once

#include "srb/fisher.hpp"
#include "srb/measurement.hpp"
#include "srb/psf.hpp"
#include "srb/qfi.hpp"
#include "srb/scene.hpp"

namespace srb {

// Classical information of ideal continuous position readout,
// F_ab = int (d_a I)(d_b I)/I dx over the intensity support.
FisherMatrix direct_imaging_cfi(const PsfModel& psf, const SourceParams& params);

// True when direct_imaging_precisions can run its quad-precision pipeline.
bool direct_imaging_hp_supported(const PsfModel& psf);

// Classical information of a mode family given its source overlaps; the
// optional bucket outcome absorbs the residual intensity. Pure algebra in the
// overlaps, so callers may transform the vectors and re-evaluate cheaply.
FisherMatrix overlap_cfi(const ModeSourceOverlap& ov, double q, bool has_bucket);

// Classical information of a mode measurement (overlap_cfi of its overlaps).
FisherMatrix measurement_cfi(const Measurement& meas, const PsfModel& psf,
                             const SourceParams& params);

// Projective measurement onto the eigenvectors of an SLD. Each G-orthonormal
// eigenvector is a single-phase complex combination of the displaced kernels
// and their first derivatives; removing the global phase yields a real mode.
Measurement sld_povm(const SldOperator& sld, const SubspaceRep& rep);

}  // namespace srb

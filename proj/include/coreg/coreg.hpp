#pragma once

#include "coreg/consensus.hpp"
#include "coreg/decode.hpp"
#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/geogate.hpp"
#include "coreg/image.hpp"
#include "coreg/manifest.hpp"
#include "coreg/pipeline.hpp"
#include "coreg/png_io.hpp"
#include "coreg/posterior.hpp"
#include "coreg/score.hpp"
#include "coreg/slic.hpp"
#include "coreg/synth.hpp"
#include "coreg/tensorio.hpp"

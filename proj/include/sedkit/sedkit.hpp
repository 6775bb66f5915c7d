#pragma once

#include "sedkit/audio_io.hpp"
#include "sedkit/config.hpp"
#include "sedkit/envelope.hpp"
#include "sedkit/error.hpp"
#include "sedkit/filtering.hpp"
#include "sedkit/labels.hpp"
#include "sedkit/postprocess.hpp"
#include "sedkit/psds.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/synth.hpp"

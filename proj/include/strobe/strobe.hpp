#pragma once

#include "strobe/config.hpp"
#include "strobe/csrecon.hpp"
#include "strobe/error.hpp"
#include "strobe/experiments.hpp"
#include "strobe/fft.hpp"
#include "strobe/io.hpp"
#include "strobe/lockin.hpp"
#include "strobe/lorentzian.hpp"
#include "strobe/nnls.hpp"
#include "strobe/random.hpp"
#include "strobe/readout.hpp"
#include "strobe/sampler.hpp"
#include "strobe/scaling.hpp"
#include "strobe/serialization.hpp"
#include "strobe/signal.hpp"
#include "strobe/special.hpp"
#include "strobe/spectral.hpp"

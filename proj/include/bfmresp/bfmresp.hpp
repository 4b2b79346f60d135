#pragma once

#include "bitstream.hpp"
#include "capture.hpp"
#include "codec.hpp"
#include "error.hpp"
#include "fixture.hpp"
#include "ingest.hpp"
#include "pcap.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "synth.hpp"

"""Directed greybox fuzzing on a logical clock."""

from .campaign import Campaign, CampaignConfig, mutate, run_campaign
from .fixtures import builtin_fixtures, fig1, fig3, mini_record_parser, random_cfg
from .probability import NO_DISTANCE, BranchStatsTable, TraceView, seed_distance
from .program import UNREACHABLE, ProgramGraph, compute_bb_distance, load_graph

__version__ = "0.1.0"

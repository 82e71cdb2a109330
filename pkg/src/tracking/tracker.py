from dataclasses import dataclass, field

import numpy as np

from src.settings import LOGGER, settings
from src.tracking.association import Node, graph_between, solve_matching


@dataclass(frozen=True, eq=False)
class Extrapolated:
    """A track's stand-in for a frame in which none of its draws was recorded."""
    position: np.ndarray
    frames_missing: int


@dataclass(eq=False)
class Track:
    track_id: int
    class_id: int
    segment_id: int
    entries: dict = field(default_factory=dict)  # frame position -> draw index or Extrapolated
    last_frame: int = 0
    last_position: np.ndarray = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def observe(self, frame, draw_index, draw):
        position = draw.position
        if self.last_position is not None and frame > self.last_frame:
            self.velocity = (position - self.last_position) / (frame - self.last_frame)
        self.entries[frame] = draw_index
        self.last_frame, self.last_position = frame, position
        self.class_id, self.segment_id = draw.class_id, draw.segment_id

    def extrapolate(self, frame):
        missing = frame - self.last_frame
        entry = Extrapolated(position=self.last_position + missing * self.velocity, frames_missing=missing)
        self.entries[frame] = entry
        return entry

    def phantom(self, frame):
        """Extrapolated node of this track at `frame`, or None if the track was observed there."""
        entry = self.entries.get(frame)
        if not isinstance(entry, Extrapolated):
            return None
        return Node(position=entry.position, class_id=self.class_id, segment_id=self.segment_id,
                    track_id=self.track_id)

    @property
    def frames(self):
        """Frame positions where the track was observed."""
        return sorted(f for f, e in self.entries.items() if not isinstance(e, Extrapolated))


@dataclass(eq=False)
class TrackSet:
    tracks: list[Track]
    max_extrapolation_frames: int
    frame_tracks: list  # per frame position: track id of each draw

    def track(self, track_id):
        return self.tracks[track_id - 1]

    def mapping(self, f, h):
        """Draw of frame position f -> draw of frame position h on the same track."""
        where = {tid: d for d, tid in enumerate(self.frame_tracks[h])}
        return {d: where[tid] for d, tid in enumerate(self.frame_tracks[f]) if tid in where}

    def extrapolated(self, frame):
        """Tracks bridged by extrapolation at a frame position: {track id: Extrapolated}."""
        return {t.track_id: t.entries[frame] for t in self.tracks
                if isinstance(t.entries.get(frame), Extrapolated)}


def pair_mapping(tracks, f, h):
    """Identity mapping between the draws of two (not necessarily consecutive) frames."""
    return tracks.mapping(f, h)


def track_sequence(seq, max_extrapolation_frames=None):
    """
    Assigns persistent track ids to the draws of every frame.

    Frames are processed in order. Draws of frame f, plus phantoms of tracks
    missing since an earlier frame (their last position moved on linearly by
    the last observed velocity), are matched to the draws of f + 1. Tracks
    missing for more than `max_extrapolation_frames` frames retire; draws left
    unmatched open new tracks. Ids are never reused.

    Args:
        seq (TraceSequence): Validated sequence.
        max_extrapolation_frames (int): Frames a lost track is extrapolated before it retires.

    Returns:
        TrackSet: Tracks and the per-frame draw -> track id table.
    """
    limit = settings.MAX_EXTRAPOLATION_FRAMES if max_extrapolation_frames is None else max_extrapolation_frames
    tracks, frame_tracks, active = [], [], []

    def open_track(frame, d, draw):
        track = Track(track_id=len(tracks) + 1, class_id=draw.class_id, segment_id=draw.segment_id)
        track.observe(frame, d, draw)
        tracks.append(track)
        return track

    for g, frame_g in enumerate(seq.frames):
        ids = [0] * len(frame_g.draws)
        if g == 0:
            for d, draw in enumerate(frame_g.draws):
                ids[d] = open_track(g, d, draw).track_id
            active = list(tracks)
            frame_tracks.append(ids)
            continue

        f = g - 1
        frame_f = seq.frames[f]
        phantoms = [node for node in (t.phantom(f) for t in active) if node is not None]
        graph = graph_between(frame_f, frame_g, seq.class_table, phantoms, frame_tracks[f])
        nodes_f = graph.nodes_f
        matching = solve_matching(graph)

        matched = set()
        for edge in matching:
            track = tracks[nodes_f[edge.i].track_id - 1]
            track.observe(g, edge.j, frame_g.draws[edge.j])
            ids[edge.j] = track.track_id
            matched.add(track.track_id)
        for d, draw in enumerate(frame_g.draws):
            if not ids[d]:
                ids[d] = open_track(g, d, draw).track_id

        survivors = []
        for track in active:
            if track.track_id in matched:
                survivors.append(track)
            elif g - track.last_frame <= limit:
                track.extrapolate(g)
                survivors.append(track)
        active = survivors + [t for t in tracks if t.last_frame == g and t.track_id not in matched]
        frame_tracks.append(ids)
        LOGGER.debug(f"frame {frame_g.frame_index}: {len(matching)} match(es), "
                     f"{sum(1 for n in nodes_f if n.is_phantom)} phantom(s), {len(tracks)} track(s) so far")

    LOGGER.info(f"Tracked {len(seq.frames)} frame(s) into {len(tracks)} track(s)")
    return TrackSet(tracks=tracks, max_extrapolation_frames=limit, frame_tracks=frame_tracks)


def persistent_instance_ids(instance_map, track_ids):
    """
    Sequence-level id of each instance of a frame: the smallest track id among its members.

    Args:
        instance_map (InstanceMap): Instances of the frame.
        track_ids (list[int]): Track id of each draw of the frame.

    Returns:
        dict[int, int]: Per-frame instance id -> persistent id.
    """
    return {inst.instance_id: min(track_ids[d] for d in inst.members) for inst in instance_map.instances}

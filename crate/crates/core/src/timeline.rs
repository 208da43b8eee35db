//! Per-visit timelines for the User page: merged event blocks and
//! current-view segments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_model::{Event, EventCategory, EventRegistry, TimestampMs, ViewKind};
use crate::sessionizer::Corpus;

pub const DEFAULT_MERGE_GAP_MS: i64 = 1_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimelineError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("visit {index} out of range (user has {count} visits)")]
    VisitOutOfRange { index: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineBlock {
    pub event_name: String,
    pub category: EventCategory,
    pub start_ts: TimestampMs,
    pub end_ts: TimestampMs,
    pub occurrence_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSegment {
    pub view: ViewKind,
    pub start_ts: TimestampMs,
    pub end_ts: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub user_id: String,
    pub visit_index: usize,
    pub start_ts: TimestampMs,
    pub end_ts: TimestampMs,
    pub blocks: Vec<TimelineBlock>,
    pub segments: Vec<ViewSegment>,
}

/// Greedy left-to-right merge: an event joins the open block when it has the
/// same name as the block's last member and follows it by at most `merge_gap`.
pub fn merge_blocks(events: &[Event], merge_gap_ms: i64) -> Vec<TimelineBlock> {
    let mut blocks: Vec<TimelineBlock> = Vec::new();
    for e in events {
        match blocks.last_mut() {
            Some(b) if b.event_name == e.name && e.timestamp - b.end_ts <= merge_gap_ms => {
                b.end_ts = e.timestamp;
                b.occurrence_count += 1;
            }
            _ => blocks.push(TimelineBlock {
                event_name: e.name.clone(),
                category: e.category,
                start_ts: e.timestamp,
                end_ts: e.timestamp,
                occurrence_count: 1,
            }),
        }
    }
    blocks
}

/// Current-view intervals of one visit. A leading `NoView` segment covers
/// events before the first `open_<view>`.
pub fn view_segments(events: &[Event], registry: &EventRegistry) -> Vec<ViewSegment> {
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Vec::new();
    };
    let mut segments: Vec<ViewSegment> = Vec::new();
    if registry.view_marker(&first.name).is_none() {
        segments.push(ViewSegment { view: ViewKind::NoView, start_ts: first.timestamp, end_ts: last.timestamp });
    }
    for e in events {
        if let Some(view) = registry.view_marker(&e.name) {
            if let Some(prev) = segments.last_mut() {
                prev.end_ts = e.timestamp;
            }
            segments.push(ViewSegment { view, start_ts: e.timestamp, end_ts: last.timestamp });
        }
    }
    segments
}

/// Builds the timeline of one visit. Blocks are merged on the full event set
/// before the category filter is applied; segments ignore the filter.
pub fn build_timeline(
    corpus: &Corpus,
    registry: &EventRegistry,
    user_id: &str,
    visit_index: usize,
    filter: Option<&BTreeSet<EventCategory>>,
) -> Result<Timeline, TimelineError> {
    let user = corpus
        .get(user_id)
        .ok_or_else(|| TimelineError::UnknownUser(user_id.to_string()))?;
    let visit = user.visits.get(visit_index).ok_or(TimelineError::VisitOutOfRange {
        index: visit_index,
        count: user.visits.len(),
    })?;
    let events = user.visit_events(visit);
    let mut blocks = merge_blocks(events, DEFAULT_MERGE_GAP_MS);
    if let Some(keep) = filter {
        blocks.retain(|b| keep.contains(&b.category));
    }
    Ok(Timeline {
        user_id: user.user_id.clone(),
        visit_index,
        start_ts: visit.start_ts,
        end_ts: visit.end_ts,
        blocks,
        segments: view_segments(events, registry),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::RawEvent;
    use crate::sessionizer::{segment_visits, StitchParams, UserRecord};
    use proptest::prelude::*;

    fn events(stamped: &[(&str, i64)]) -> Vec<Event> {
        let reg = EventRegistry::builtin();
        stamped
            .iter()
            .map(|(name, ts)| {
                reg.validate_event(&RawEvent {
                    session_id: Some("s".into()),
                    ip_hash: Some("h".into()),
                    timestamp: Some(*ts),
                    name: Some(name.to_string()),
                    ..RawEvent::default()
                })
                .unwrap()
            })
            .collect()
    }

    fn spans(blocks: &[TimelineBlock]) -> Vec<(&str, i64, i64, usize)> {
        blocks
            .iter()
            .map(|b| (b.event_name.as_str(), b.start_ts, b.end_ts, b.occurrence_count))
            .collect()
    }

    #[test]
    fn merges_rapid_repeats() {
        let evs = events(&[("hover_node", 1), ("hover_node", 501), ("hover_node", 901), ("hover_node", 2501)]);
        assert_eq!(
            spans(&merge_blocks(&evs, DEFAULT_MERGE_GAP_MS)),
            [("hover_node", 1, 901, 3), ("hover_node", 2501, 2501, 1)]
        );
    }

    #[test]
    fn different_names_never_merge() {
        let evs = events(&[("hover_node", 1), ("select_node", 501)]);
        assert_eq!(merge_blocks(&evs, DEFAULT_MERGE_GAP_MS).len(), 2);
    }

    #[test]
    fn one_second_gap_is_inclusive() {
        let evs = events(&[("hover_node", 1), ("hover_node", 1001)]);
        assert_eq!(spans(&merge_blocks(&evs, DEFAULT_MERGE_GAP_MS)), [("hover_node", 1, 1001, 2)]);
        let evs = events(&[("hover_node", 1), ("hover_node", 1002)]);
        assert_eq!(merge_blocks(&evs, DEFAULT_MERGE_GAP_MS).len(), 2);
    }

    #[test]
    fn segments_without_open_events() {
        let reg = EventRegistry::builtin();
        let segs = view_segments(&events(&[("load_demo_data", 5), ("contact_team", 9)]), &reg);
        assert_eq!(segs, [ViewSegment { view: ViewKind::NoView, start_ts: 5, end_ts: 9 }]);
    }

    #[test]
    fn segments_follow_open_events() {
        let reg = EventRegistry::builtin();
        let segs = view_segments(
            &events(&[("load_demo_data", 1), ("open_matrix", 10), ("open_map", 50), ("hover_node", 90)]),
            &reg,
        );
        assert_eq!(
            segs,
            [
                ViewSegment { view: ViewKind::NoView, start_ts: 1, end_ts: 10 },
                ViewSegment { view: ViewKind::Matrix, start_ts: 10, end_ts: 50 },
                ViewSegment { view: ViewKind::Map, start_ts: 50, end_ts: 90 },
            ]
        );
        let segs = view_segments(&events(&[("hover_node", 1), ("open_matrix", 40)]), &reg);
        assert_eq!(segs.last(), Some(&ViewSegment { view: ViewKind::Matrix, start_ts: 40, end_ts: 40 }));
    }

    fn corpus_of(stamped: &[(&str, i64)]) -> Corpus {
        let user = segment_visits(
            UserRecord {
                user_id: "u1".into(),
                ip_hash: "h".into(),
                session_ids: vec!["s".into()],
                events: events(stamped),
                visits: Vec::new(),
            },
            &StitchParams::default(),
        );
        Corpus { users: vec![user] }
    }

    #[test]
    fn timeline_filtering_keeps_merge_results() {
        let reg = EventRegistry::builtin();
        let c = corpus_of(&[
            ("open_nodelink", 1),
            ("hover_node", 100),
            ("hover_node", 700),
            ("help_video", 900),
            ("hover_node", 1500),
            ("bookmark_create", 4000),
        ]);
        let full = build_timeline(&c, &reg, "u1", 0, None).unwrap();
        assert_eq!(full.blocks.iter().map(|b| b.occurrence_count).sum::<usize>(), 6);

        let only: BTreeSet<_> = [EventCategory::VisualizationInteraction].into();
        let filtered = build_timeline(&c, &reg, "u1", 0, Some(&only)).unwrap();
        assert!(filtered.blocks.iter().all(|b| full.blocks.contains(b)));
        assert_eq!(filtered.blocks.len(), 3);
        assert_eq!(filtered.segments, full.segments);

        let none = corpus_of(&[("open_map", 1), ("hover_node", 5)]);
        let bm: BTreeSet<_> = [EventCategory::Bookmark].into();
        let t = build_timeline(&none, &reg, "u1", 0, Some(&bm)).unwrap();
        assert!(t.blocks.is_empty());
        assert_eq!(t.segments.len(), 1);
    }

    #[test]
    fn timeline_errors() {
        let reg = EventRegistry::builtin();
        let c = corpus_of(&[("open_map", 1)]);
        assert_eq!(
            build_timeline(&c, &reg, "zzz", 0, None),
            Err(TimelineError::UnknownUser("zzz".into()))
        );
        assert_eq!(
            build_timeline(&c, &reg, "u1", 3, None),
            Err(TimelineError::VisitOutOfRange { index: 3, count: 1 })
        );
    }

    proptest! {
        #[test]
        fn blocks_partition_events(steps in prop::collection::vec((0u8..3, 0i64..2500), 0..80)) {
            let names = ["hover_node", "select_node", "pan_zoom"];
            let mut ts = 1;
            let stamped: Vec<(&str, i64)> = steps
                .iter()
                .map(|(n, d)| { ts += d; (names[*n as usize], ts) })
                .collect();
            let evs = events(&stamped);
            let blocks = merge_blocks(&evs, DEFAULT_MERGE_GAP_MS);
            prop_assert_eq!(blocks.iter().map(|b| b.occurrence_count).sum::<usize>(), evs.len());
            for b in &blocks {
                prop_assert!(b.end_ts >= b.start_ts);
                if b.occurrence_count == 1 {
                    prop_assert_eq!(b.start_ts, b.end_ts);
                }
                if b.start_ts < b.end_ts {
                    prop_assert!(b.occurrence_count > 1);
                }
            }
            for name in names {
                let mine: Vec<_> = blocks.iter().filter(|b| b.event_name == name).collect();
                prop_assert!(mine.windows(2).all(|w| w[0].end_ts <= w[1].start_ts));
            }
        }
    }
}

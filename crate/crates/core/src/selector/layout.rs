use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Question(usize),
    Video(usize),
    Query(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutMode {
    /// `[question.., video.., queries..]`
    AppendEnd,
    /// Question prefix, then each video block followed by one query.
    Interleaved,
}

/// Placement of question, video and query vectors in the scanned sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceLayout {
    slots: Vec<Slot>,
    video: usize,
    queries: usize,
    question: usize,
}

impl SequenceLayout {
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn video_count(&self) -> usize {
        self.video
    }

    pub fn query_count(&self) -> usize {
        self.queries
    }

    pub fn question_count(&self) -> usize {
        self.question
    }

    /// Sequence positions of the queries, in query-index order.
    pub fn query_positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.queries];
        for (k, slot) in self.slots.iter().enumerate() {
            if let Slot::Query(i) = *slot {
                pos[i] = k;
            }
        }
        pos
    }

    /// Sequence positions of the video tokens, in video-index order.
    pub fn video_positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.video];
        for (k, slot) in self.slots.iter().enumerate() {
            if let Slot::Video(i) = *slot {
                pos[i] = k;
            }
        }
        pos
    }

    /// Number of video tokens between consecutive queries (the first gap
    /// counts from the start of the video).
    pub fn video_gaps(&self) -> Vec<usize> {
        let mut gaps = Vec::with_capacity(self.queries);
        let mut run = 0;
        for slot in &self.slots {
            match slot {
                Slot::Video(_) => run += 1,
                Slot::Query(_) => {
                    gaps.push(run);
                    run = 0;
                }
                Slot::Question(_) => {}
            }
        }
        gaps
    }
}

/// Builds the slot order for `video` tokens, `queries` queries and a
/// `question`-token prefix.
///
/// Interleaved blocks have sizes `⌈L/N⌉` (first `L mod N` blocks) and `⌊L/N⌋`.
pub fn build_layout(
    video: usize,
    queries: usize,
    mode: LayoutMode,
    question: usize,
) -> Result<SequenceLayout> {
    if video == 0 {
        return Err(Error::invalid("layout needs at least one video token"));
    }
    let mut slots = Vec::with_capacity(question + video + queries);
    slots.extend((0..question).map(Slot::Question));
    match mode {
        LayoutMode::AppendEnd => {
            slots.extend((0..video).map(Slot::Video));
            slots.extend((0..queries).map(Slot::Query));
        }
        LayoutMode::Interleaved if queries == 0 => {
            slots.extend((0..video).map(Slot::Video));
        }
        LayoutMode::Interleaved => {
            if queries > video {
                return Err(Error::invalid(format!(
                    "{queries} interleaved queries need at least as many video tokens, got {video}"
                )));
            }
            let (base, extra) = (video / queries, video % queries);
            let mut next = 0;
            for q in 0..queries {
                let block = base + usize::from(q < extra);
                slots.extend((next..next + block).map(Slot::Video));
                next += block;
                slots.push(Slot::Query(q));
            }
        }
    }
    Ok(SequenceLayout {
        slots,
        video,
        queries,
        question,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_blocks() {
        let l = build_layout(8, 2, LayoutMode::Interleaved, 0).unwrap();
        let mut expected: Vec<Slot> = (0..4).map(Slot::Video).collect();
        expected.push(Slot::Query(0));
        expected.extend((4..8).map(Slot::Video));
        expected.push(Slot::Query(1));
        assert_eq!(l.slots(), expected.as_slice());
    }

    #[test]
    fn larger_blocks_first() {
        let l = build_layout(6, 4, LayoutMode::Interleaved, 0).unwrap();
        assert_eq!(l.video_gaps(), vec![2, 2, 1, 1]);
    }

    #[test]
    fn four_video_two_queries() {
        let l = build_layout(4, 2, LayoutMode::Interleaved, 0).unwrap();
        assert_eq!(l.len(), 6);
        assert_eq!(l.query_positions(), vec![2, 5]);
    }

    #[test]
    fn no_queries_is_all_video() {
        for mode in [LayoutMode::AppendEnd, LayoutMode::Interleaved] {
            let l = build_layout(5, 0, mode, 0).unwrap();
            assert_eq!(
                l.slots(),
                (0..5).map(Slot::Video).collect::<Vec<_>>().as_slice()
            );
        }
    }

    #[test]
    fn append_end_with_question() {
        let l = build_layout(3, 2, LayoutMode::AppendEnd, 2).unwrap();
        assert_eq!(
            l.slots(),
            &[
                Slot::Question(0),
                Slot::Question(1),
                Slot::Video(0),
                Slot::Video(1),
                Slot::Video(2),
                Slot::Query(0),
                Slot::Query(1)
            ]
        );
    }

    #[test]
    fn too_many_interleaved_queries() {
        assert!(build_layout(3, 4, LayoutMode::Interleaved, 0).is_err());
        assert!(build_layout(3, 4, LayoutMode::AppendEnd, 0).is_ok());
        assert!(build_layout(0, 0, LayoutMode::AppendEnd, 0).is_err());
    }

    proptest! {
        #[test]
        fn slot_invariants(video in 1usize..300, q_frac in 0.0f64..=1.0, question in 0usize..5, interleave in any::<bool>()) {
            let queries = ((video as f64) * q_frac) as usize;
            let mode = if interleave { LayoutMode::Interleaved } else { LayoutMode::AppendEnd };
            let l = build_layout(video, queries, mode, question).unwrap();
            prop_assert_eq!(l.len(), video + queries + question);
            let (mut nq, mut nv, mut nx) = (0, 0, 0);
            for (k, slot) in l.slots().iter().enumerate() {
                match *slot {
                    Slot::Question(i) => { prop_assert_eq!(i, nx); prop_assert_eq!(k, i); nx += 1; }
                    Slot::Video(i) => { prop_assert_eq!(i, nv); nv += 1; }
                    Slot::Query(i) => { prop_assert_eq!(i, nq); nq += 1; }
                }
            }
            prop_assert_eq!((nx, nv, nq), (question, video, queries));
            if interleave && queries > 0 {
                let gaps = l.video_gaps();
                let (lo, hi) = (gaps.iter().min().unwrap(), gaps.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
                prop_assert_eq!(l.slots().last(), Some(&Slot::Query(queries - 1)));
            }
        }
    }
}

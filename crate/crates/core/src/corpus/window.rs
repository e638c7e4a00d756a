use serde::{Deserialize, Serialize};

/// Channel offsets of a sample relative to its anchor frame: the anchor plus
/// three neighbours on each side, four frames apart across a 12-frame reach.
pub const WINDOW_OFFSETS: [isize; 7] = [-12, -8, -4, 0, 4, 8, 12];

/// One network input: seven frame indices stacked as channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSample {
    pub anchor: usize,
    pub frames: [usize; 7],
    pub label: Option<u16>,
}

/// One sample per frame; neighbours that fall outside the sequence are
/// clamped to the nearest valid frame.
pub fn window_samples(n_frames: usize, labels: Option<&[u16]>) -> Vec<WindowSample> {
    if n_frames == 0 {
        return Vec::new();
    }
    let last = (n_frames - 1) as isize;
    (0..n_frames)
        .map(|anchor| {
            let mut frames = [0usize; 7];
            for (slot, off) in frames.iter_mut().zip(WINDOW_OFFSETS) {
                *slot = (anchor as isize + off).clamp(0, last) as usize;
            }
            WindowSample {
                anchor,
                frames,
                label: labels.and_then(|l| l.get(anchor).copied()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interior_anchor_spans_full_window() {
        let s = window_samples(25, None);
        assert_eq!(s[12].frames, [0, 4, 8, 12, 16, 20, 24]);
    }

    #[test]
    fn left_edge_is_clamped() {
        let s = window_samples(25, None);
        assert_eq!(s[0].frames, [0, 0, 0, 0, 4, 8, 12]);
        assert_eq!(s[24].frames, [12, 16, 20, 24, 24, 24, 24]);
    }

    #[test]
    fn single_frame_sequence() {
        let s = window_samples(1, Some(&[5]));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].frames, [0; 7]);
        assert_eq!(s[0].label, Some(5));
    }

    proptest! {
        #[test]
        fn one_sample_per_frame(n in 1usize..300) {
            let labels: Vec<u16> = (0..n as u16).collect();
            let s = window_samples(n, Some(&labels));
            prop_assert_eq!(s.len(), n);
            for (i, w) in s.iter().enumerate() {
                prop_assert_eq!(w.anchor, i);
                prop_assert_eq!(w.label, Some(i as u16));
                prop_assert!(w.frames.iter().all(|&f| f < n));
                prop_assert!(w.frames.windows(2).all(|p| p[0] <= p[1]));
            }
        }
    }
}

use super::MotionClip;
use crate::error::{Error, Result};

/// Subject held out for evaluation.
pub const TEST_SUBJECT: u32 = 5;

/// Split clips into (train, test): subjects 1-4 train, subject 5 test.
pub fn split_dataset(clips: Vec<MotionClip>) -> Result<(Vec<MotionClip>, Vec<MotionClip>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for clip in clips {
        match clip.subject {
            Some(TEST_SUBJECT) => test.push(clip),
            Some(1..=4) => train.push(clip),
            Some(s) => return Err(Error::InvalidSubject(s)),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "clip `{}` carries no subject identifier",
                    clip.name
                )))
            }
        }
    }
    if train.is_empty() {
        log::warn!("dataset split produced an empty training set");
    }
    Ok((train, test))
}

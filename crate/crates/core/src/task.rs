use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The three classification problems, each with a fixed class order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    /// Crack presence: `noncrack` / `crack`.
    Crack,
    /// Marked pavement with or without cracks: `mark` / `mark_crack`.
    Mark,
    /// Fatigue-crack severity: `none` / `moderate` / `high`.
    Severity,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Crack, Task::Mark, Task::Severity];

    pub fn name(self) -> &'static str {
        match self {
            Task::Crack => "crack",
            Task::Mark => "mark",
            Task::Severity => "severity",
        }
    }

    /// Class names, indexed by class id.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Task::Crack => &["noncrack", "crack"],
            Task::Mark => &["mark", "mark_crack"],
            Task::Severity => &["none", "moderate", "high"],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }

    pub fn class_index(self, label: &str) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }

    pub fn class_name(self, index: usize) -> Option<&'static str> {
        self.labels().get(index).copied()
    }

    /// Side length of the square grayscale input.
    pub fn input_size(self) -> usize {
        match self {
            Task::Crack | Task::Mark => 256,
            Task::Severity => 500,
        }
    }

    pub fn default_epochs(self) -> usize {
        match self {
            Task::Crack | Task::Severity => 30,
            Task::Mark => 20,
        }
    }

    pub fn default_val_ratio(self) -> f64 {
        match self {
            Task::Crack => 0.2,
            Task::Mark => 0.1,
            Task::Severity => 0.3,
        }
    }

    /// Display name of the trained network for this task.
    pub fn model_name(self) -> &'static str {
        match self {
            Task::Crack => "ModelC",
            Task::Mark => "ModelM",
            Task::Severity => "ModelS",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Task::Crack => 0,
            Task::Mark => 1,
            Task::Severity => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown task `{s}` (expected crack, mark or severity)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_orders() {
        assert_eq!(Task::Severity.class_index("none"), Some(0));
        assert_eq!(Task::Severity.class_index("high"), Some(2));
        assert_eq!(Task::Severity.class_index("minor"), None);
        assert_eq!(Task::Mark.class_index("mark_crack"), Some(1));
        assert_eq!(Task::Crack.class_name(1), Some("crack"));
        for t in Task::ALL {
            assert_eq!(Task::from_tag(t.tag()), Some(t));
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("potholes".parse::<Task>().is_err());
    }
}

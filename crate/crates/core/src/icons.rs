use std::collections::BTreeMap;

/// Maps icon ids to the PNG references carried by 3D billboards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IconRegistry {
    base: String,
    overrides: BTreeMap<String, String>,
}

impl Default for IconRegistry {
    fn default() -> Self {
        Self::new("icons")
    }
}

impl IconRegistry {
    /// `base` is a directory path or URL prefix; icon `x` resolves to `base/x.png`.
    pub fn new(base: impl Into<String>) -> Self {
        let mut base = base.into();
        while base.len() > 1 && base.ends_with('/') {
            base.pop();
        }
        Self {
            base,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_icon(mut self, icon_id: impl Into<String>, reference: impl Into<String>) -> Self {
        self.overrides.insert(icon_id.into(), reference.into());
        self
    }

    pub fn resolve(&self, icon_id: &str) -> String {
        let icon_id = if icon_id.is_empty() {
            crate::style::DEFAULT_ICON
        } else {
            icon_id
        };
        match self.overrides.get(icon_id) {
            Some(r) => r.clone(),
            None => format!("{}/{icon_id}.png", self.base),
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use super::split::LabeledItem;
use super::{ClassifierError, Result};
use crate::types::Category;

/// Reads a `<root>/<class name>/<image file>` tree. Item ids are
/// `<class dir>/<file name>`; entries are sorted so ids are stable.
pub fn load_dataset_dir(root: &Path) -> Result<Vec<LabeledItem<PathBuf>>> {
    let mut class_dirs: Vec<_> = fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    class_dirs.sort_by_key(|e| e.file_name());

    let mut items = Vec::new();
    for dir in class_dirs {
        let dir_name = dir.file_name().to_string_lossy().into_owned();
        let label = Category::from_label(&dir_name)
            .filter(|c| c.is_model_class())
            .ok_or_else(|| {
                ClassifierError::LabelMismatch(format!("directory {dir_name:?} is not a class"))
            })?;
        let mut files: Vec<PathBuf> = fs::read_dir(dir.path())?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file() && media_type_of(p).is_some())
            .collect();
        files.sort();
        for path in files {
            let file_name = path.file_name().unwrap_or_default().to_string_lossy();
            items.push(LabeledItem::new(
                format!("{dir_name}/{file_name}"),
                label,
                path.clone(),
            ));
        }
    }
    Ok(items)
}

pub fn media_type_of(path: &Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some("image/png"),
        "jpg" | "jpeg" => Some("image/jpeg"),
        _ => None,
    }
}

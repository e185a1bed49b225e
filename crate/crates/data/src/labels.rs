use std::path::Path;

use crate::error::{DataError, Result};

/// Display names indexed by label.
pub const CLASS_NAMES: [&str; 2] = ["NORMAL", "PNEUMONIA"];

/// Label from the file name alone (directories are ignored): `NORMAL` in any
/// case gives 0, `virus` or `bacteria` gives 1.
pub fn label_from_filename(name: &str) -> Result<u8> {
    let file = Path::new(name).file_name().and_then(|f| f.to_str()).unwrap_or(name);
    let lower = file.to_ascii_lowercase();
    if lower.contains("normal") {
        Ok(0)
    } else if lower.contains("virus") || lower.contains("bacteria") {
        Ok(1)
    } else {
        Err(DataError::Unlabelable(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_rule() {
        assert_eq!(label_from_filename("IM-0001-NORMAL.jpeg").unwrap(), 0);
        assert_eq!(label_from_filename("NORMAL2-IM-1427-0001.jpeg").unwrap(), 0);
        assert_eq!(label_from_filename("person1_virus_6.jpeg").unwrap(), 1);
        assert_eq!(label_from_filename("person1000_bacteria_2931.jpeg").unwrap(), 1);
        assert_eq!(label_from_filename("train/PNEUMONIA/person1_virus_6.jpeg").unwrap(), 1);
        assert!(matches!(label_from_filename("scan42.jpeg"), Err(DataError::Unlabelable(_))));
        assert!(label_from_filename("NORMAL/scan42.jpeg").is_err());
        assert!(label_from_filename("").is_err());
    }
}

use std::path::Path;
use std::sync::OnceLock;

use crate::data::{self, DataError};
use crate::features::FeatureTable;
use crate::ipa::{Chart, Inventory, TranscriptionSystem};
use crate::lexicon::{LangRegistry, ScriptTable};

/// Every data table the pipeline consults, loaded once and shared.
#[derive(Debug, Clone)]
pub struct Resources {
    pub inventory: Inventory,
    pub features: FeatureTable,
    pub xsampa: Chart,
    pub arpabet: Chart,
    pub languages: LangRegistry,
    pub scripts: ScriptTable,
}

/// Optional replacements for the compiled-in data files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataPaths {
    pub inventory: Option<std::path::PathBuf>,
    pub features: Option<std::path::PathBuf>,
    pub xsampa: Option<std::path::PathBuf>,
    pub arpabet: Option<std::path::PathBuf>,
    pub languages: Option<std::path::PathBuf>,
    pub scripts: Option<std::path::PathBuf>,
}

fn load<T>(
    path: Option<&Path>,
    builtin: &T,
    parse: impl FnOnce(&str, &str) -> Result<T, DataError>,
) -> Result<T, DataError>
where
    T: Clone,
{
    match path {
        None => Ok(builtin.clone()),
        Some(p) => parse(&data::read_file(p)?, &p.display().to_string()),
    }
}

impl Resources {
    pub fn builtin() -> &'static Resources {
        static RESOURCES: OnceLock<Resources> = OnceLock::new();
        RESOURCES
            .get_or_init(|| Resources::load(&DataPaths::default()).expect("builtin data parses"))
    }

    pub fn load(paths: &DataPaths) -> Result<Self, DataError> {
        Ok(Resources {
            inventory: load(
                paths.inventory.as_deref(),
                Inventory::builtin(),
                Inventory::from_tsv,
            )?,
            features: load(
                paths.features.as_deref(),
                FeatureTable::builtin(),
                FeatureTable::from_tsv,
            )?,
            xsampa: load(
                paths.xsampa.as_deref(),
                Chart::builtin(TranscriptionSystem::XSampa).expect("chart"),
                Chart::from_tsv,
            )?,
            arpabet: load(
                paths.arpabet.as_deref(),
                Chart::builtin(TranscriptionSystem::Arpabet).expect("chart"),
                Chart::from_tsv,
            )?,
            languages: load(
                paths.languages.as_deref(),
                LangRegistry::builtin(),
                LangRegistry::from_tsv,
            )?,
            scripts: load(
                paths.scripts.as_deref(),
                ScriptTable::builtin(),
                ScriptTable::from_tsv,
            )?,
        })
    }

    pub fn chart(&self, system: TranscriptionSystem) -> Option<&Chart> {
        match system {
            TranscriptionSystem::Ipa => None,
            TranscriptionSystem::XSampa => Some(&self.xsampa),
            TranscriptionSystem::Arpabet => Some(&self.arpabet),
        }
    }
}

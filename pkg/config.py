import os
import logging
from dotenv import load_dotenv

logger = logging.getLogger('coarsemed.config')

# name -> default
INT_SETTINGS = {
    'TABLE_CAP': 4096,
    'MATERIALIZE_CAP': 128,
    'EXHAUSTIVE_CAP': 64,
    'LIPSCHITZ_EXHAUSTIVE_CAP': 32,
    'CUBE_ORACLE_CAP': 16,
    'DEFAULT_SAMPLES': 10000,
}

FLOAT_SETTINGS = {
    'TOLERANCE': 1e-9,
}


class ConfigManager:
    """
    Configuration manager with validation and hot-reloading support
    """
    def __init__(self):
        self.config = {}
        self.load_config()

    def load_config(self):
        """
        Load configuration from COARSEMED_* environment variables with validation
        """
        load_dotenv()

        config = {
            'LOG_LEVEL': os.getenv('COARSEMED_LOG_LEVEL', 'INFO').upper(),
            'LOG_DIR': os.getenv('COARSEMED_LOG_DIR', 'logs'),
            'LOG_TO_FILE': os.getenv('COARSEMED_LOG_TO_FILE', '1') not in ('0', 'false', 'no'),
        }

        if config['LOG_LEVEL'] not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            error_msg = f"Invalid COARSEMED_LOG_LEVEL: {config['LOG_LEVEL']}"
            logger.error(error_msg)
            raise ValueError(error_msg)

        for name, default in INT_SETTINGS.items():
            raw = os.getenv(f'COARSEMED_{name}')
            try:
                value = int(raw) if raw is not None else default
            except ValueError:
                error_msg = f"COARSEMED_{name} must be an integer, got {raw!r}"
                logger.error(error_msg)
                raise ValueError(error_msg)
            if value <= 0:
                error_msg = f"COARSEMED_{name} must be positive, got {value}"
                logger.error(error_msg)
                raise ValueError(error_msg)
            config[name] = value

        for name, default in FLOAT_SETTINGS.items():
            raw = os.getenv(f'COARSEMED_{name}')
            try:
                value = float(raw) if raw is not None else default
            except ValueError:
                error_msg = f"COARSEMED_{name} must be a number, got {raw!r}"
                logger.error(error_msg)
                raise ValueError(error_msg)
            if value <= 0:
                error_msg = f"COARSEMED_{name} must be positive, got {value}"
                logger.error(error_msg)
                raise ValueError(error_msg)
            config[name] = value

        # Seed is optional; sampled runs without one are rejected by the CLI
        raw_seed = os.getenv('COARSEMED_DEFAULT_SEED')
        try:
            config['DEFAULT_SEED'] = int(raw_seed) if raw_seed else None
        except ValueError:
            error_msg = f"COARSEMED_DEFAULT_SEED must be an integer, got {raw_seed!r}"
            logger.error(error_msg)
            raise ValueError(error_msg)

        # Mutate in place so modules holding a CONFIG reference see reloads
        self.config.clear()
        self.config.update(config)
        logger.debug("Configuration loaded successfully")

    def reload(self):
        """
        Reload configuration from environment variables
        """
        logger.info("Reloading configuration...")
        try:
            self.load_config()
            logger.info("Configuration reloaded successfully")
            return True
        except Exception as e:
            logger.error(f"Failed to reload configuration: {e}")
            return False

    def get_config(self):
        """
        Get the current configuration

        Returns:
            dict: Current configuration
        """
        return self.config


# Create singleton instance
config_manager = ConfigManager()
CONFIG = config_manager.get_config()

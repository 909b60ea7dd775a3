import os
import sys
from dotenv import load_dotenv

def check_environment():
    """Environment and setup check"""
    
    print("🔍 Bi-objective Tuning Toolkit Setup Check")
    print("=" * 50)
    
    # Load environment variables
    load_dotenv()
    
    success = True
    
    # Check Python version
    python_version = sys.version_info
    if python_version >= (3, 9):
        print(f"✅ Python version: {python_version.major}.{python_version.minor}.{python_version.micro}")
    else:
        print(f"❌ Python version {python_version.major}.{python_version.minor} is too old. Need 3.9+")
        success = False
    
    # .env is optional; every setting has a default
    if os.path.exists('.env'):
        print("✅ .env file found")
        source = os.getenv("ENERGY_SOURCE", "synthetic")
        print(f"   ENERGY_SOURCE={source}, STATIC_POWER_W={os.getenv('STATIC_POWER_W', '0')}")
        if source == "replay" and not os.getenv("REPLAY_PATH"):
            print("⚠️  ENERGY_SOURCE is replay but REPLAY_PATH is not set")
    else:
        print("⚠️  .env file not found - using defaults (synthetic energy source)")
    
    for path in ('app', 'fixtures'):
        if os.path.exists(path):
            print(f"✅ {path}/ directory exists")
        else:
            print(f"❌ {path}/ directory not found")
            success = False
    
    # Check required Python packages
    required_packages = [
        'fastapi', 'uvicorn', 'pydantic', 'scikit-learn', 'python-dotenv',
        'numpy', 'scipy', 'pandas', 'psutil', 'pytest', 'httpx'
    ]
    imports = {'scikit-learn': 'sklearn', 'python-dotenv': 'dotenv'}
    
    print("\n📦 Checking Python packages:")
    for package in required_packages:
        try:
            __import__(imports.get(package, package))
            print(f"✅ {package}")
        except ImportError:
            print(f"❌ {package} not installed")
            success = False
    
    print("\n" + "=" * 50)
    
    if success:
        print("🎉 All checks passed!")
    else:
        print("❌ Some checks failed. Please fix the issues above.")
        print("\nTo install missing packages:")
        print("pip install -r requirements.txt")
    
    return success

def check_kernels():
    """Run the kernel self-test against the naive oracles"""
    try:
        from app.core import physical_core_count
        from app.kernels import selftest
        
        print(f"🖥️  Physical cores: {physical_core_count()} "
              f"(logical: {physical_core_count(include_hyperthreads=True)})")
        
        results = selftest()
        failed = [r for r in results if not r.passed]
        for r in failed:
            print(f"❌ {r.check} {r.config or ''} error={r.error:.3g}")
        
        if failed:
            print(f"❌ {len(failed)} of {len(results)} kernel checks failed")
            return False
        
        print(f"✅ All {len(results)} kernel checks passed")
        return True
            
    except Exception as e:
        print(f"❌ Kernel self-test failed: {e}")
        return False

if __name__ == "__main__":
    if check_environment():
        print("\n🔍 Running kernel self-test...")
        if check_kernels():
            print("\n🚀 Everything is ready!")
            print("\nNext steps:")
            print("1. Run: python -m app configs")
            print("2. Run: python -m app sweep --kernel gemm_h --n 256 --energy synthetic:unit")
            print("3. Or serve the API: uvicorn app.main:app --host 0.0.0.0 --port 8000")
        else:
            print("\n⚠️  Environment setup is correct but the kernel self-test failed.")
